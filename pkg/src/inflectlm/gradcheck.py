"""Central finite-difference check of analytic gradients."""

from __future__ import annotations

from typing import Callable

import numpy as np


def finite_difference_check(loss_fn: Callable[[np.ndarray], float], params: np.ndarray,
                            analytic_grad: np.ndarray, eps: float = 1e-5,
                            n_samples: int | None = None, seed: int = 0) -> float:
    """Max relative error between ``analytic_grad`` and central differences.

    ``params`` is a flat float64 vector; ``loss_fn`` maps such a vector to a
    scalar. With ``n_samples`` set, only that many randomly chosen coordinates
    are perturbed.
    """
    theta = np.array(params, dtype=np.float64).ravel()
    analytic_grad = np.asarray(analytic_grad, dtype=np.float64).ravel()
    if analytic_grad.shape != theta.shape:
        raise ValueError("gradient and parameter vector differ in size")
    base = loss_fn(theta.copy())
    if not np.isfinite(base):
        raise FloatingPointError(f"loss is not finite at the check point: {base}")

    coords = np.arange(theta.size)
    if n_samples is not None and n_samples < theta.size:
        coords = np.random.default_rng(seed).choice(theta.size, size=n_samples, replace=False)

    worst = 0.0
    for i in coords:
        saved = theta[i]
        theta[i] = saved + eps
        plus = loss_fn(theta.copy())
        theta[i] = saved - eps
        minus = loss_fn(theta.copy())
        theta[i] = saved
        if not (np.isfinite(plus) and np.isfinite(minus)):
            raise FloatingPointError(f"loss is not finite around coordinate {i}")
        numeric = (plus - minus) / (2.0 * eps)
        ga = analytic_grad[i]
        err = abs(ga - numeric) / max(1e-8, abs(ga) + abs(numeric))
        worst = max(worst, err)
    return float(worst)
