"""Mini-batch training, optimizers, and the pretrain-then-finetune workflow."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .encoder import EncodedSample, SampleSet, build_vocab
from .model import CharModel, ModelConfig, ModelParams, init_model, loss_and_grads

logger = logging.getLogger(__name__)

PRECISIONS = {"float32": np.float32, "float64": np.float64}


class TrainingDivergedError(FloatingPointError):
    def __init__(self, epoch: int, batch: int, loss: float):
        super().__init__(f"non-finite loss {loss} at epoch {epoch}, batch {batch}")
        self.epoch, self.batch, self.loss = epoch, batch, loss


@dataclass
class TrainConfig:
    epochs: int = 14
    batch_size: int = 128
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    rho: float = 0.9  # rmsprop decay
    epsilon: float = 1e-8
    grad_clip_norm: float | None = 5.0
    shuffle_seed: int = 0
    precision: str = "float32"
    bucket_batches: bool = False

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.optimizer not in ("adam", "rmsprop"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.precision not in PRECISIONS:
            raise ValueError(f"precision must be one of {sorted(PRECISIONS)}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainReport:
    epoch_losses: list[float] = field(default_factory=list)
    sample_count: int = 0
    epoch_seconds: list[float] = field(default_factory=list)
    max_grad_norms: list[float] = field(default_factory=list)  # before clipping
    clipped_batches: list[int] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    checkpoint_path: str | None = None

    def to_dict(self, include_timing: bool = True) -> dict:
        d = asdict(self)
        if not include_timing:
            d["epoch_seconds"] = None
        return d


def global_norm(grads: ModelParams) -> float:
    return float(math.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for _, g in grads.items())))


def clip_gradients(grads: ModelParams, max_norm: float | None) -> float:
    """Scale ``grads`` in place so their global norm is at most ``max_norm``.

    Returns the norm before clipping.
    """
    norm = global_norm(grads)
    if max_norm is not None and norm > max_norm:
        scale = max_norm / (norm + 1e-12)
        for _, g in grads.items():
            g *= scale
    return norm


class Adam:
    def __init__(self, params: ModelParams, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = params.zeros_like()
        self.v = params.zeros_like()
        self.t = 0

    def step(self, params: ModelParams, grads: ModelParams) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        corr = math.sqrt(1.0 - b2 ** self.t) / (1.0 - b1 ** self.t)
        for name, g in grads.items():
            m, v = self.m[name], self.v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            params[name][...] -= self.lr * corr * m / (np.sqrt(v) + self.eps)


class RMSprop:
    def __init__(self, params: ModelParams, lr: float, rho=0.9, eps=1e-8):
        self.lr, self.rho, self.eps = lr, rho, eps
        self.v = params.zeros_like()

    def step(self, params: ModelParams, grads: ModelParams) -> None:
        for name, g in grads.items():
            v = self.v[name]
            v *= self.rho
            v += (1.0 - self.rho) * g * g
            params[name][...] -= self.lr * g / (np.sqrt(v) + self.eps)


def make_optimizer(params: ModelParams, tc: TrainConfig):
    if tc.optimizer == "adam":
        return Adam(params, tc.learning_rate, tc.beta1, tc.beta2, tc.epsilon)
    return RMSprop(params, tc.learning_rate, tc.rho, tc.epsilon)


BUCKET_POOL = 32  # batches per length-sorted pool


def epoch_batches(data: SampleSet, batch_size: int, rng: np.random.Generator,
                  bucket: bool = True) -> list[np.ndarray]:
    """Shuffled mini-batches of sample indices.

    With ``bucket`` the shuffled order is cut into pools of ``BUCKET_POOL``
    batches, each pool is sorted by context length, and the resulting batches
    are shuffled again. Batches then hold similar amounts of padding, which the
    model trims away. This roughly halves epoch time but each batch now covers
    one band of positions in the line, and convergence per epoch suffers, so
    it is off by default.
    """
    n = len(data)
    order = rng.permutation(n)
    if not bucket:
        return [order[lo:lo + batch_size] for lo in range(0, n, batch_size)]
    lengths = np.minimum(data.ends - data.starts, data.max_length)
    pool = batch_size * BUCKET_POOL
    batches = []
    for lo in range(0, n, pool):
        chunk = order[lo:lo + pool]
        chunk = chunk[np.argsort(lengths[chunk], kind="stable")]
        batches.extend(chunk[i:i + batch_size] for i in range(0, len(chunk), batch_size))
    return [batches[i] for i in rng.permutation(len(batches))]


def _as_sample_set(samples) -> SampleSet:
    if isinstance(samples, SampleSet):
        return samples
    return SampleSet.from_samples(list(samples))


def train(params: ModelParams, cfg: ModelConfig, samples: SampleSet | Sequence[EncodedSample],
          tc: TrainConfig, on_epoch_end: Callable[[int, ModelParams, float], None] | None = None,
          ) -> tuple[ModelParams, TrainReport]:
    """Train a copy of ``params`` and return it with a per-epoch loss report.

    Master weights stay float64; with ``precision="float32"`` the forward and
    backward passes run on a float32 copy taken at every step.
    """
    data = _as_sample_set(samples)
    if len(data) == 0:
        raise ValueError("no training samples")
    if data.max_length != cfg.max_length:
        raise ValueError(f"samples were encoded with T={data.max_length}, model expects {cfg.max_length}")
    if int(data.targets.max()) >= cfg.vocab_size or (data.flat.size and int(data.flat.max()) >= cfg.vocab_size):
        raise ValueError("sample ids exceed the model vocabulary")

    params = params.astype(np.float64)
    dtype = PRECISIONS[tc.precision]
    optimizer = make_optimizer(params, tc)
    rng = np.random.default_rng(tc.shuffle_seed)
    n = len(data)
    report = TrainReport(sample_count=n, config=tc.to_dict())

    for epoch in range(tc.epochs):
        started = time.perf_counter()
        total, max_norm, clipped = 0.0, 0.0, 0
        for batch_no, index in enumerate(epoch_batches(data, tc.batch_size, rng, tc.bucket_batches)):
            contexts, targets = data.batch(index)
            work = params if dtype is np.float64 else params.astype(dtype)
            loss, losses, grads = loss_and_grads(work, cfg, contexts, targets)
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch + 1, batch_no + 1, loss)
            total += float(np.sum(losses, dtype=np.float64))
            grads = grads.astype(np.float64)
            norm = clip_gradients(grads, tc.grad_clip_norm)
            max_norm = max(max_norm, norm)
            clipped += tc.grad_clip_norm is not None and norm > tc.grad_clip_norm
            optimizer.step(params, grads)
        mean_loss = total / n
        report.epoch_losses.append(mean_loss)
        report.epoch_seconds.append(time.perf_counter() - started)
        report.max_grad_norms.append(max_norm)
        report.clipped_batches.append(clipped)
        logger.info("epoch %d/%d loss %.5f max grad norm %.3f, %d clipped (%.1fs)", epoch + 1,
                    tc.epochs, mean_loss, max_norm, clipped, report.epoch_seconds[-1])
        if on_epoch_end is not None:
            on_epoch_end(epoch + 1, params, mean_loss)
    return params, report


def pretrain_finetune(model_cfg: ModelConfig, pretrain_lines: Sequence[str],
                      finetune_lines: Sequence[str], tc_pre: TrainConfig, tc_fine: TrainConfig,
                      ) -> tuple[CharModel, TrainReport, TrainReport]:
    """Train on a general corpus, then continue on the inflection corpus.

    The vocabulary spans both corpora. ``model_cfg.vocab_size`` is replaced by
    the union vocabulary size. The second phase starts from the first phase's
    weights with fresh optimizer state.
    """
    vocab = build_vocab(list(pretrain_lines) + list(finetune_lines))
    cfg = ModelConfig(**{**model_cfg.to_dict(), "vocab_size": vocab.size})
    params = init_model(cfg)
    pre = SampleSet.from_lines(pretrain_lines, vocab, cfg.max_length)
    fine = SampleSet.from_lines(finetune_lines, vocab, cfg.max_length)
    params, report_pre = train(params, cfg, pre, tc_pre)
    params, report_fine = train(params, cfg, fine, tc_fine)
    meta = {"train_mean_line_length": float(np.mean([len(s) for s in finetune_lines]))}
    return CharModel(params, cfg, vocab, meta), report_pre, report_fine
