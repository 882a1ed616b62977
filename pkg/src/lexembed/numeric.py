"""Parameter initialization, SGD updates, and finite-difference checking.

Everything runs in float64. The gradient checker is the verification
harness every hand-derived backward pass in this package is tested
against.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .errors import DimensionError, NumericError, ParameterError

REL_ERR_FLOOR = 1e-8


def uniform_init(rows: int, cols: int, scale: float, seed: int) -> np.ndarray:
    """Seeded i.i.d. uniform matrix on [-scale, +scale]."""
    if rows < 1 or cols < 1:
        raise DimensionError(f"dimensions must be >= 1, got {rows}x{cols}")
    if not scale > 0:
        raise ParameterError(f"scale must be > 0, got {scale}")
    rng = np.random.default_rng(seed)
    return rng.uniform(-scale, scale, size=(rows, cols))


def sgd_update(param: np.ndarray, grad: np.ndarray, lr: float) -> np.ndarray:
    """In-place step ``param -= lr * grad``; returns the updated array."""
    if param.shape != grad.shape:
        raise DimensionError(
            f"param shape {param.shape} != grad shape {grad.shape}"
        )
    if not lr > 0:
        raise ParameterError(f"learning rate must be > 0, got {lr}")
    param -= lr * grad
    return param


@dataclass
class GradCheckReport:
    """Result of checking one named parameter against central differences."""

    param_name: str
    max_rel_err: float
    epsilon: float
    passed: bool


def finite_diff_check(
    loss_fn: Callable[[], float],
    params: Mapping[str, np.ndarray],
    analytic_grads: Mapping[str, np.ndarray],
    epsilon: float = 1e-5,
    tol: float = 1e-4,
) -> list[GradCheckReport]:
    """Compare analytic gradients against central finite differences.

    ``loss_fn`` must be deterministic, side-effect free, and read its
    parameters from the arrays in ``params`` (they are perturbed in place
    and restored). For every entry the relative error is
    ``|a - n| / max(|a|, |n|, 1e-8)``; a parameter passes when its worst
    entry is within ``tol``.
    """
    if not (1e-6 <= epsilon <= 1e-3):
        raise ParameterError(f"epsilon must be in [1e-6, 1e-3], got {epsilon}")
    if set(params) != set(analytic_grads):
        raise ParameterError(
            f"params {sorted(params)} != grads {sorted(analytic_grads)}"
        )
    reports = []
    for name, p in params.items():
        a = analytic_grads[name]
        if p.shape != a.shape:
            raise DimensionError(
                f"{name}: param shape {p.shape} != grad shape {a.shape}"
            )
        worst = 0.0
        flat = p.reshape(-1)
        aflat = a.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + epsilon
            lo_hi = loss_fn()
            flat[i] = orig - epsilon
            lo_lo = loss_fn()
            flat[i] = orig
            if not (np.isfinite(lo_hi) and np.isfinite(lo_lo)):
                raise NumericError(f"loss_fn returned non-finite value at {name}[{i}]")
            numeric = (lo_hi - lo_lo) / (2.0 * epsilon)
            rel = abs(aflat[i] - numeric) / max(abs(aflat[i]), abs(numeric), REL_ERR_FLOOR)
            if rel > worst:
                worst = rel
        reports.append(GradCheckReport(name, worst, epsilon, worst <= tol))
    return reports
