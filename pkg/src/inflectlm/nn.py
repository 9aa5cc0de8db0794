"""Numeric layers of the character model, each with a hand-written backward.

Everything works on batches: sequences are ``(batch, time, features)`` and a
boolean ``mask`` of shape ``(batch, time)`` marks real (non-PAD) steps. Masked
steps carry the recurrent state through unchanged, emit zeros, and get zero
attention weight.

LSTM gates are stacked in the order [input, forget, candidate, output].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PROB_FLOOR = 1e-12


def sigmoid(x: np.ndarray) -> np.ndarray:
    # tanh form never overflows
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    z = logits - np.max(logits, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=axis, keepdims=True)


# -- embedding ---------------------------------------------------------------

def embedding_forward(ids: np.ndarray, E: np.ndarray) -> np.ndarray:
    ids = np.asarray(ids)
    if ids.size and (ids.min() < 0 or ids.max() >= E.shape[0]):
        raise IndexError(f"embedding id out of range [0, {E.shape[0]})")
    return E[ids]


def embedding_backward(ids: np.ndarray, d_out: np.ndarray, n_rows: int) -> np.ndarray:
    dE = np.zeros((n_rows, d_out.shape[-1]), dtype=d_out.dtype)
    np.add.at(dE, np.asarray(ids).ravel(), d_out.reshape(-1, d_out.shape[-1]))
    return dE


# -- LSTM --------------------------------------------------------------------

@dataclass
class LstmWeights:
    W: np.ndarray  # (4H, D)
    U: np.ndarray  # (4H, H)
    b: np.ndarray  # (4H,)

    def __post_init__(self):
        four_h = self.U.shape[0]
        if (four_h % 4 or self.U.shape != (four_h, four_h // 4)
                or self.W.ndim != 2 or self.W.shape[0] != four_h or self.b.shape != (four_h,)):
            raise ValueError(
                f"inconsistent LSTM shapes W{self.W.shape} U{self.U.shape} b{self.b.shape}")

    @property
    def hidden_size(self) -> int:
        return self.U.shape[1]

    @property
    def input_size(self) -> int:
        return self.W.shape[1]


def lstm_cell(x: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray,
              w: LstmWeights) -> tuple[np.ndarray, np.ndarray]:
    """One LSTM step; works on a single vector or on a batch of rows."""
    if x.shape[-1] != w.input_size or h_prev.shape[-1] != w.hidden_size \
            or c_prev.shape != h_prev.shape:
        raise ValueError("lstm_cell: shape mismatch")
    H = w.hidden_size
    z = x @ w.W.T + h_prev @ w.U.T + w.b
    i = sigmoid(z[..., :H])
    f = sigmoid(z[..., H:2 * H])
    g = np.tanh(z[..., 2 * H:3 * H])
    o = sigmoid(z[..., 3 * H:])
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    return h, c


class _LstmCache:
    __slots__ = ("Xt", "shape", "mask_t", "full", "empty", "w", "reverse",
                 "gates", "tanh_c", "h_prev", "c_prev")


def lstm_layer_forward(X: np.ndarray, w: LstmWeights, mask: np.ndarray,
                       reverse: bool = False) -> tuple[np.ndarray, _LstmCache]:
    """Run one direction over ``X`` (B, T, D) from a zero state.

    Returns the outputs (B, T, H) and a cache for :func:`lstm_layer_backward`.
    """
    B, T, D = X.shape
    if D != w.input_size or mask.shape != (B, T):
        raise ValueError("lstm_layer_forward: shape mismatch")
    H = w.hidden_size
    dtype = X.dtype
    # time-major internally so per-step slices are contiguous
    Xt = np.ascontiguousarray(X.transpose(1, 0, 2))
    gates = (Xt.reshape(T * B, D) @ w.W.T).reshape(T, B, 4 * H)
    gates += w.b
    UT = np.ascontiguousarray(w.U.T)
    mask_t = np.ascontiguousarray(mask.T)
    full = mask_t.all(axis=1)
    empty = ~mask_t.any(axis=1)

    h = np.zeros((B, H), dtype=dtype)
    c = np.zeros((B, H), dtype=dtype)
    zeros = h
    out = np.zeros((T, B, H), dtype=dtype)
    h_prev: list = [None] * T
    c_prev: list = [None] * T
    tanh_c: list = [None] * T
    steps = range(T - 1, -1, -1) if reverse else range(T)
    for t in steps:
        h_prev[t], c_prev[t] = h, c
        if empty[t]:
            tanh_c[t] = zeros
            continue
        z = gates[t]
        z += h @ UT
        g = np.tanh(z[:, 2 * H:3 * H])
        z *= 0.5
        np.tanh(z, out=z)
        z += 1.0
        z *= 0.5
        z[:, 2 * H:3 * H] = g
        c_new = z[:, H:2 * H] * c
        c_new += z[:, :H] * g
        tc = np.tanh(c_new)
        h_new = z[:, 3 * H:] * tc
        tanh_c[t] = tc
        if full[t]:
            out[t] = h_new
            h, c = h_new, c_new
        else:
            m = mask_t[t][:, None]
            out[t] = np.where(m, h_new, 0.0)
            h = np.where(m, h_new, h)
            c = np.where(m, c_new, c)

    cache = _LstmCache()
    cache.Xt, cache.shape, cache.w, cache.reverse = Xt, (B, T, D), w, reverse
    cache.mask_t, cache.full, cache.empty = mask_t, full, empty
    cache.gates, cache.tanh_c, cache.h_prev, cache.c_prev = gates, tanh_c, h_prev, c_prev
    return out.transpose(1, 0, 2), cache


def lstm_layer_backward(d_out: np.ndarray, cache: _LstmCache) -> tuple[np.ndarray, LstmWeights]:
    """Gradients w.r.t. the layer input and the weights (returned as LstmWeights)."""
    B, T, D = cache.shape
    w = cache.w
    H = w.hidden_size
    dtype = cache.Xt.dtype
    d_out_t = np.ascontiguousarray(d_out.transpose(1, 0, 2), dtype=dtype)
    dz_all = np.zeros((T, B, 4 * H), dtype=dtype)
    dh = np.zeros((B, H), dtype=dtype)
    dc = np.zeros((B, H), dtype=dtype)
    U = w.U
    steps = range(T) if cache.reverse else range(T - 1, -1, -1)
    for t in steps:
        if cache.empty[t]:
            continue  # state passed straight through
        a = cache.gates[t]
        i, f, g, o = a[:, :H], a[:, H:2 * H], a[:, 2 * H:3 * H], a[:, 3 * H:]
        tc = cache.tanh_c[t]
        dh_new = dh + d_out_t[t]
        if cache.full[t]:
            dc_new = dc.copy()
        else:
            m = cache.mask_t[t][:, None]
            dh_new = np.where(m, dh_new, 0.0)
            dc_new = np.where(m, dc, 0.0)
        dc_new += dh_new * o * (1.0 - tc * tc)
        dz = dz_all[t]
        dz[:, :H] = dc_new * g * i * (1.0 - i)
        dz[:, H:2 * H] = dc_new * cache.c_prev[t] * f * (1.0 - f)
        dz[:, 2 * H:3 * H] = dc_new * i * (1.0 - g * g)
        dz[:, 3 * H:] = dh_new * tc * o * (1.0 - o)
        dh_next = dz @ U
        dc_next = dc_new * f
        if not cache.full[t]:
            dh_next += np.where(m, 0.0, dh)
            dc_next += np.where(m, 0.0, dc)
        dh, dc = dh_next, dc_next
    flat_dz = dz_all.reshape(T * B, 4 * H)
    h_prev = np.stack(cache.h_prev).reshape(T * B, H)
    dU = flat_dz.T @ h_prev
    dW = flat_dz.T @ cache.Xt.reshape(T * B, D)
    db = flat_dz.sum(axis=0)
    dX = (flat_dz @ w.W).reshape(T, B, D).transpose(1, 0, 2)
    return dX, LstmWeights(dW, dU, db)


def bilstm_layer_forward(X: np.ndarray, fwd: LstmWeights, bwd: LstmWeights,
                         mask: np.ndarray) -> tuple[np.ndarray, tuple[_LstmCache, _LstmCache]]:
    out_f, cache_f = lstm_layer_forward(X, fwd, mask)
    out_b, cache_b = lstm_layer_forward(X, bwd, mask, reverse=True)
    return np.concatenate([out_f, out_b], axis=-1), (cache_f, cache_b)


def bilstm_layer_backward(d_out: np.ndarray, caches) -> tuple[np.ndarray, LstmWeights, LstmWeights]:
    cache_f, cache_b = caches
    H = cache_f.w.hidden_size
    dX_f, g_f = lstm_layer_backward(d_out[..., :H], cache_f)
    dX_b, g_b = lstm_layer_backward(d_out[..., H:], cache_b)
    return dX_f + dX_b, g_f, g_b


def bilstm_forward(X: np.ndarray, fwd: LstmWeights, bwd: LstmWeights,
                   mask: np.ndarray) -> np.ndarray:
    """Bidirectional LSTM over one sequence ``X`` (T, D); returns (T, 2H)."""
    X = np.asarray(X, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    out, _ = bilstm_layer_forward(X[None], fwd, bwd, mask[None])
    return out[0]


# -- attention pooling -------------------------------------------------------

@dataclass
class AttentionWeights:
    w: np.ndarray  # (D_feat,)
    b: np.ndarray  # scalar, shape ()


class _AttentionCache:
    __slots__ = ("F", "alpha", "w")


def attention_layer_forward(F: np.ndarray, aw: AttentionWeights,
                            mask: np.ndarray) -> tuple[np.ndarray, _AttentionCache]:
    """Softmax-weighted average over time of ``F`` (B, T, D)."""
    if not np.all(mask.any(axis=1)):
        raise ValueError("attention needs at least one unmasked step per sequence")
    if F.shape[-1] != aw.w.shape[0]:
        raise ValueError("attention: feature width mismatch")
    # The bias shifts every logit equally, so it cancels in the softmax; it is
    # left out here so the cancellation is exact in floating point too.
    B, T, D = F.shape
    u = (F.reshape(B * T, D) @ aw.w).reshape(B, T)
    u = np.where(mask, u, -np.inf)
    u = u - u.max(axis=1, keepdims=True)
    e = np.exp(u)
    alpha = e / e.sum(axis=1, keepdims=True)
    out = (alpha[:, None, :] @ F)[:, 0]
    cache = _AttentionCache()
    cache.F, cache.alpha, cache.w = F, alpha, aw.w
    return out, cache


def attention_layer_backward(d_out: np.ndarray, cache: _AttentionCache):
    F, alpha = cache.F, cache.alpha
    d_alpha = (F @ d_out[:, :, None])[..., 0]
    du = alpha * (d_alpha - np.sum(alpha * d_alpha, axis=1, keepdims=True))
    dF = alpha[..., None] * d_out[:, None, :] + du[..., None] * cache.w
    dw = du.reshape(-1) @ F.reshape(-1, F.shape[-1])
    db = np.asarray(du.sum())
    return dF, AttentionWeights(dw, db)


def attention_weighted_average(F: np.ndarray, aw: AttentionWeights,
                               mask: np.ndarray | None = None) -> np.ndarray:
    """Pool one sequence ``F`` (T, D) into a single D-vector."""
    F = np.asarray(F, dtype=float)
    mask = np.ones(F.shape[0], dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    out, _ = attention_layer_forward(F[None], aw, mask[None])
    return out[0]


def attention_weights(F: np.ndarray, aw: AttentionWeights, mask: np.ndarray | None = None) -> np.ndarray:
    F = np.asarray(F, dtype=float)
    mask = np.ones(F.shape[0], dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    _, cache = attention_layer_forward(F[None], aw, mask[None])
    return cache.alpha[0]


# -- output layer and loss ---------------------------------------------------

def dense_softmax(v: np.ndarray, W: np.ndarray, b: np.ndarray) -> np.ndarray:
    """softmax(W v + b) for a vector or a batch of row vectors."""
    if v.shape[-1] != W.shape[1] or b.shape != (W.shape[0],):
        raise ValueError("dense_softmax: shape mismatch")
    return softmax(v @ W.T + b)


def cross_entropy(p: np.ndarray, target: int) -> float:
    if not 0 <= target < p.shape[-1]:
        raise IndexError(f"target {target} out of range for {p.shape[-1]} classes")
    return float(-np.log(max(p[target], PROB_FLOOR)))


def batch_cross_entropy(p: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Per-row loss for probabilities (B, V) and integer targets (B,)."""
    picked = p[np.arange(len(targets)), targets]
    return -np.log(np.maximum(picked, PROB_FLOOR))
