"""The character model: embedding, stacked BiLSTMs, skip-connected attention
pooling and a softmax output layer, plus its checkpoint format."""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from . import nn
from .encoder import PAD_ID, CharVocab

DIRECTIONS = ("fwd", "bwd")


@dataclass
class ModelConfig:
    vocab_size: int
    max_length: int = 40
    embed_dim: int = 100
    lstm_units: int = 128
    lstm_layers: int = 2
    bidirectional: bool = True
    seed: int = 0

    def __post_init__(self):
        for name in ("max_length", "embed_dim", "lstm_units", "lstm_layers"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.vocab_size < 3:
            raise ValueError("vocab_size must be >= 3 (PAD, EOL and at least one character)")

    @property
    def directions(self) -> tuple[str, ...]:
        return DIRECTIONS if self.bidirectional else DIRECTIONS[:1]

    @property
    def layer_output_dim(self) -> int:
        return self.lstm_units * len(self.directions)

    @property
    def feature_dim(self) -> int:
        return self.embed_dim + self.lstm_layers * self.layer_output_dim

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        return cls(**data)


def param_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Every tensor of the model, in canonical (checkpoint) order."""
    H, V = cfg.lstm_units, cfg.vocab_size
    shapes: dict[str, tuple[int, ...]] = {"embedding": (V, cfg.embed_dim)}
    in_dim = cfg.embed_dim
    for layer in range(cfg.lstm_layers):
        for d in cfg.directions:
            shapes[f"lstm{layer}.{d}.W"] = (4 * H, in_dim)
            shapes[f"lstm{layer}.{d}.U"] = (4 * H, H)
            shapes[f"lstm{layer}.{d}.b"] = (4 * H,)
        in_dim = cfg.layer_output_dim
    shapes["attention.w"] = (cfg.feature_dim,)
    shapes["attention.b"] = ()
    shapes["dense.W"] = (V, cfg.feature_dim)
    shapes["dense.b"] = (V,)
    return shapes


@dataclass
class ModelParams:
    """Named weight tensors; see :func:`param_shapes` for names and order."""

    arrays: dict[str, np.ndarray] = field(default_factory=dict)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]

    def __iter__(self):
        return iter(self.arrays)

    def items(self):
        return self.arrays.items()

    def lstm(self, layer: int, direction: str) -> nn.LstmWeights:
        p = f"lstm{layer}.{direction}."
        return nn.LstmWeights(self.arrays[p + "W"], self.arrays[p + "U"], self.arrays[p + "b"])

    @property
    def attention(self) -> nn.AttentionWeights:
        return nn.AttentionWeights(self.arrays["attention.w"], self.arrays["attention.b"])

    def copy(self) -> "ModelParams":
        return ModelParams({k: v.copy() for k, v in self.arrays.items()})

    def astype(self, dtype) -> "ModelParams":
        return ModelParams({k: v.astype(dtype) for k, v in self.arrays.items()})

    def zeros_like(self) -> "ModelParams":
        return ModelParams({k: np.zeros_like(v) for k, v in self.arrays.items()})

    def flatten(self) -> np.ndarray:
        return np.concatenate([v.ravel() for v in self.arrays.values()])

    def unflatten(self, flat: np.ndarray) -> "ModelParams":
        out, pos = {}, 0
        for name, v in self.arrays.items():
            out[name] = np.asarray(flat[pos:pos + v.size], dtype=v.dtype).reshape(v.shape)
            pos += v.size
        if pos != len(flat):
            raise ValueError("flat vector size does not match the parameters")
        return ModelParams(out)

    def check_shapes(self, cfg: ModelConfig) -> None:
        expected = param_shapes(cfg)
        if list(expected) != list(self.arrays):
            raise ValueError("parameter names do not match the configuration")
        for name, shape in expected.items():
            if self.arrays[name].shape != shape:
                raise ValueError(f"{name}: shape {self.arrays[name].shape} != {shape}")


def glorot_limit(shape: tuple[int, ...]) -> float:
    fan_out, fan_in = (shape[0], shape[1]) if len(shape) == 2 else (1, shape[0])
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def init_model(cfg: ModelConfig) -> ModelParams:
    """Glorot-uniform weights, zero biases, forget-gate biases at 1."""
    rng = np.random.default_rng(cfg.seed)
    arrays = {}
    H = cfg.lstm_units
    for name, shape in param_shapes(cfg).items():
        if name.endswith(".b") or name == "attention.b":
            value = np.zeros(shape)
            if name.startswith("lstm"):
                value[H:2 * H] = 1.0
        else:
            s = glorot_limit(shape)
            value = rng.uniform(-s, s, size=shape)
        arrays[name] = value
    return ModelParams(arrays)


def feature_mask(contexts: np.ndarray) -> np.ndarray:
    """Non-PAD positions; the last position is always unmasked."""
    mask = contexts != PAD_ID
    mask[:, -1] = True
    return mask


class _ForwardCache:
    __slots__ = ("ids", "mask", "emb", "layers", "attn", "pooled", "probs")


def _trim(contexts: np.ndarray, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Columns that are PAD for every row contribute exactly nothing.
    first = int(np.argmax(mask.any(axis=0)))
    return contexts[:, first:], mask[:, first:]


def forward_batch(params: ModelParams, cfg: ModelConfig, contexts: np.ndarray,
                  keep_cache: bool = False):
    """Next-character distributions for contexts (B, T); returns (B, V)."""
    contexts = np.asarray(contexts)
    if contexts.ndim != 2 or contexts.shape[1] != cfg.max_length:
        raise ValueError(f"contexts must have shape (batch, {cfg.max_length}), got {contexts.shape}")
    mask = feature_mask(contexts)
    ids, mask = _trim(contexts, mask)

    emb = nn.embedding_forward(ids, params["embedding"])
    x = emb
    pieces = [emb]
    layer_caches = []
    for layer in range(cfg.lstm_layers):
        if cfg.bidirectional:
            x, lc = nn.bilstm_layer_forward(x, params.lstm(layer, "fwd"), params.lstm(layer, "bwd"), mask)
        else:
            x, lc = nn.lstm_layer_forward(x, params.lstm(layer, "fwd"), mask)
        pieces.append(x)
        layer_caches.append(lc)
    features = np.concatenate(pieces, axis=-1)
    pooled, attn_cache = nn.attention_layer_forward(features, params.attention, mask)
    probs = nn.dense_softmax(pooled, params["dense.W"], params["dense.b"])
    if not keep_cache:
        return probs
    cache = _ForwardCache()
    cache.ids, cache.mask, cache.emb = ids, mask, emb
    cache.layers, cache.attn, cache.pooled, cache.probs = layer_caches, attn_cache, pooled, probs
    return probs, cache


def forward(params: ModelParams, cfg: ModelConfig, context) -> np.ndarray:
    """Next-character distribution for one left-padded context of length T."""
    context = np.asarray(context)
    if context.shape != (cfg.max_length,):
        raise ValueError(f"context length must be {cfg.max_length}, got {context.shape}")
    return forward_batch(params, cfg, context[None])[0]


def loss_and_grads(params: ModelParams, cfg: ModelConfig, contexts: np.ndarray,
                   targets: np.ndarray) -> tuple[float, np.ndarray, ModelParams]:
    """Mean cross-entropy over the batch, per-sample losses, and gradients."""
    probs, cache = forward_batch(params, cfg, contexts, keep_cache=True)
    targets = np.asarray(targets)
    B = len(targets)
    losses = nn.batch_cross_entropy(probs, targets)

    d_logits = probs.copy()
    d_logits[np.arange(B), targets] -= 1.0
    d_logits /= B
    grads = {
        "dense.W": d_logits.T @ cache.pooled,
        "dense.b": d_logits.sum(axis=0),
    }
    d_pooled = d_logits @ params["dense.W"]
    d_features, g_attn = nn.attention_layer_backward(d_pooled, cache.attn)
    grads["attention.w"] = g_attn.w
    grads["attention.b"] = g_attn.b

    E, L = cfg.embed_dim, cfg.layer_output_dim
    d_emb = d_features[..., :E].copy()
    d_x = None
    for layer in range(cfg.lstm_layers - 1, -1, -1):
        start = E + layer * L
        d_out = d_features[..., start:start + L]
        if d_x is not None:
            d_out = d_out + d_x
        if cfg.bidirectional:
            d_x, g_f, g_b = nn.bilstm_layer_backward(d_out, cache.layers[layer])
            per_dir = {"fwd": g_f, "bwd": g_b}
        else:
            d_x, g_f = nn.lstm_layer_backward(d_out, cache.layers[layer])
            per_dir = {"fwd": g_f}
        for d, g in per_dir.items():
            grads[f"lstm{layer}.{d}.W"] = g.W
            grads[f"lstm{layer}.{d}.U"] = g.U
            grads[f"lstm{layer}.{d}.b"] = g.b
    d_emb += d_x
    grads["embedding"] = nn.embedding_backward(cache.ids, d_emb, cfg.vocab_size)

    ordered = ModelParams({name: np.asarray(grads[name], dtype=params[name].dtype)
                           for name in params})
    return float(losses.mean()), losses, ordered


# -- bundle and checkpoints ---------------------------------------------------

@dataclass
class CharModel:
    """A trained network together with its config, vocabulary and metadata."""

    params: ModelParams
    config: ModelConfig
    vocab: CharVocab
    meta: dict = field(default_factory=dict)

    def predict_proba(self, contexts: np.ndarray) -> np.ndarray:
        return forward_batch(self.params, self.config, np.asarray(contexts))

    def save(self, path) -> None:
        save_checkpoint(path, self.params, self.config, self.vocab, self.meta)

    @classmethod
    def load(cls, path) -> "CharModel":
        params, cfg, vocab, meta = load_checkpoint(path, with_meta=True)
        return cls(params, cfg, vocab, meta)


MAGIC = b"MGCK"
FORMAT_VERSION = 1
_HEADER_LEN = struct.Struct("<Q")


class CheckpointError(Exception):
    pass


class CheckpointFormatError(CheckpointError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class TruncatedCheckpointError(CheckpointError):
    pass


class ManifestError(CheckpointError):
    pass


def save_checkpoint(path, params: ModelParams, cfg: ModelConfig, vocab: CharVocab,
                    meta: dict | None = None) -> None:
    """Write ``MGCK`` + u64 header length + JSON header + little-endian f64 data."""
    params.check_shapes(cfg)
    if vocab.size != cfg.vocab_size:
        raise ValueError("vocabulary size does not match the configuration")
    manifest, blobs, offset = [], [], 0
    for name, value in params.items():
        data = np.ascontiguousarray(value, dtype="<f8").tobytes()
        manifest.append({"name": name, "shape": list(value.shape), "offset": offset, "nbytes": len(data)})
        blobs.append(data)
        offset += len(data)
    header = {
        "format_version": FORMAT_VERSION,
        "config": cfg.to_dict(),
        "vocab": vocab.to_dict(),
        "meta": meta or {},
        "tensors": manifest,
    }
    raw = json.dumps(header, sort_keys=True, ensure_ascii=False).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER_LEN.pack(len(raw)))
        fh.write(raw)
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path, with_meta: bool = False):
    """Inverse of :func:`save_checkpoint`; returns (params, cfg, vocab[, meta])."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise CheckpointFormatError(f"{path}: not a checkpoint (bad magic)")
    if len(blob) < 4 + _HEADER_LEN.size:
        raise TruncatedCheckpointError(f"{path}: truncated header")
    (header_len,) = _HEADER_LEN.unpack_from(blob, 4)
    data_start = 4 + _HEADER_LEN.size + header_len
    if len(blob) < data_start:
        raise TruncatedCheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(blob[4 + _HEADER_LEN.size:data_start].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointFormatError(f"{path}: unreadable header ({exc})") from None

    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(f"{path}: format version {version!r}, expected {FORMAT_VERSION}")
    try:
        cfg = ModelConfig.from_dict(header["config"])
        vocab = CharVocab.from_dict(header["vocab"])
        tensors = header["tensors"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ManifestError(f"{path}: bad header ({exc})") from None
    if vocab.size != cfg.vocab_size:
        raise ManifestError(f"{path}: vocabulary size {vocab.size} != config {cfg.vocab_size}")

    expected = param_shapes(cfg)
    names = [t.get("name") for t in tensors]
    if names != list(expected):
        raise ManifestError(f"{path}: tensor list does not match the configuration")
    data = memoryview(blob)[data_start:]
    arrays, offset = {}, 0
    for t in tensors:
        shape = tuple(t["shape"])
        if shape != expected[t["name"]]:
            raise ManifestError(f"{path}: {t['name']} has shape {shape}, config implies {expected[t['name']]}")
        nbytes = 8 * int(np.prod(shape, dtype=np.int64))
        if t["nbytes"] != nbytes or t["offset"] != offset:
            raise ManifestError(f"{path}: {t['name']} offset/size inconsistent with its shape")
        if offset + nbytes > len(data):
            raise TruncatedCheckpointError(f"{path}: truncated tensor data")
        arrays[t["name"]] = np.frombuffer(data[offset:offset + nbytes], dtype="<f8").astype(np.float64).reshape(shape)
        offset += nbytes
    if offset != len(data):
        raise ManifestError(f"{path}: {len(data) - offset} trailing bytes after tensor data")
    params = ModelParams(arrays)
    if with_meta:
        return params, cfg, vocab, header.get("meta", {})
    return params, cfg, vocab
