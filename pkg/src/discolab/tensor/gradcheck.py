"""Central-difference gradient checks."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .core import Tensor, no_grad


def _rel_err(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = np.maximum(1e-12, np.abs(analytic) + np.abs(numeric))
    return float(np.max(np.abs(analytic - numeric) / denom))


def finite_diff_check(fn: Callable[[Tensor], Tensor], point, h: float = 1e-5) -> float:
    """Max relative error between backprop and central differences of ``fn`` at ``point``."""
    point = np.array(point, dtype=np.float64)
    x = Tensor(point.copy(), requires_grad=True)
    fn(x).backward()
    analytic = x.grad if x.grad is not None else np.zeros_like(point)
    numeric = np.empty_like(point)
    with no_grad():
        for i in range(point.size):
            orig = point.flat[i]
            point.flat[i] = orig + h
            fp = float(fn(Tensor(point)).data)
            point.flat[i] = orig - h
            fm = float(fn(Tensor(point)).data)
            point.flat[i] = orig
            numeric.flat[i] = (fp - fm) / (2 * h)
    return _rel_err(analytic, numeric)


def param_finite_diff_check(
    loss_fn: Callable[[], Tensor],
    params: list[Tensor],
    h: float = 1e-5,
    max_coords: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Same check against the parameters a closure reads.

    With ``max_coords`` set, a random subset of coordinates per parameter is
    checked instead of all of them.
    """
    for p in params:
        p.grad = None
    loss_fn().backward()
    worst = 0.0
    rng = rng or np.random.default_rng(0)
    with no_grad():
        for p in params:
            analytic = p.grad if p.grad is not None else np.zeros_like(p.data)
            idx = np.arange(p.size)
            if max_coords is not None and p.size > max_coords:
                idx = rng.choice(p.size, size=max_coords, replace=False)
            a = analytic.reshape(-1)[idx]
            num = np.empty(len(idx))
            flat = p.data.reshape(-1)
            for j, i in enumerate(idx):
                orig = flat[i]
                flat[i] = orig + h
                fp = float(loss_fn().data)
                flat[i] = orig - h
                fm = float(loss_fn().data)
                flat[i] = orig
                num[j] = (fp - fm) / (2 * h)
            worst = max(worst, _rel_err(a, num))
    for p in params:
        p.grad = None
    return worst
