"""Finite-difference verification of analytic gradients.

The backward passes here are written by hand, so every layer gets
checked against central differences on small float64 models.
"""
from __future__ import annotations

import numpy as np

from .optim import SparseRowGrad

EPS_DEFAULT = 1e-5
# Central differences at eps=1e-5 on an O(1) double-precision loss
# carry ~1e-11 of cancellation noise. Coordinates whose gradients sit
# near that floor would report pure noise as relative error, so the
# denominator is floored: differences below the floor count as exact.
DENOM_FLOOR = 2e-6


def _dense(grad, shape):
    if isinstance(grad, SparseRowGrad):
        out = np.zeros(shape, dtype=grad.values.dtype)
        out[grad.rows] = grad.values
        return out
    return grad


def finite_diff_check(
    loss_fn,
    params: dict,
    analytic: dict,
    eps: float = EPS_DEFAULT,
    max_coords: int = 64,
    rng: np.random.Generator | None = None,
):
    """Compare analytic gradients against central differences.

    loss_fn(params) must return a scalar and read the arrays in params
    by reference; entries are perturbed in place and restored. Arrays
    larger than max_coords are subsampled. Returns (max_rel_err,
    report) with one entry per parameter name.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    report = {}
    worst = 0.0
    for name, p in params.items():
        if name not in analytic:
            raise KeyError(f"no analytic gradient for {name!r}")
        a = _dense(analytic[name], p.shape)
        flat = p.reshape(-1)
        n_coords = flat.size
        if n_coords > max_coords:
            coords = rng.choice(n_coords, size=max_coords, replace=False)
        else:
            coords = np.arange(n_coords)
        worst_here = 0.0
        for idx in coords:
            orig = flat[idx]
            flat[idx] = orig + eps
            up = loss_fn(params)
            flat[idx] = orig - eps
            down = loss_fn(params)
            flat[idx] = orig
            numeric = (up - down) / (2.0 * eps)
            an = float(a.reshape(-1)[idx])
            denom = max(abs(numeric), abs(an), DENOM_FLOOR)
            err = abs(numeric - an) / denom
            worst_here = max(worst_here, err)
        report[name] = worst_here
        worst = max(worst, worst_here)
    return worst, report
