"""Gradient clipping and plain SGD updates.

Updates are applied in place to a flat name -> array parameter dict.
Embedding gradients arrive as SparseRowGrad so a mini-batch only
touches the rows it used.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class SparseRowGrad:
    """Gradient restricted to a set of rows of a 2-D parameter."""

    rows: np.ndarray  # (K,) int row indices, unique
    values: np.ndarray  # (K, D)


def merge_row_grads(parts) -> SparseRowGrad:
    """Sum several sparse row gradients for the same parameter."""
    parts = list(parts)
    if not parts:
        raise ValueError("nothing to merge")
    rows = np.concatenate([p.rows for p in parts])
    values = np.concatenate([p.values for p in parts])
    uniq, inverse = np.unique(rows, return_inverse=True)
    out = np.zeros((uniq.size, values.shape[1]), dtype=values.dtype)
    np.add.at(out, inverse, values)
    return SparseRowGrad(uniq, out)


def global_grad_norm(grads: dict) -> float:
    """L2 norm over the concatenation of every gradient entry."""
    total = 0.0
    for g in grads.values():
        v = g.values if isinstance(g, SparseRowGrad) else g
        v = v.astype(np.float64, copy=False)
        total += float(np.dot(v.ravel(), v.ravel()))
    return float(np.sqrt(total))


def clip_and_sgd_step(params: dict, grads: dict, lr: float, clip: float) -> float:
    """Scale grads to a global norm of at most clip, then step.

    Mutates params in place and returns the pre-clip norm. Raises on a
    non-finite norm (diverged model) or a non-positive learning rate.
    """
    if lr <= 0.0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    if clip <= 0.0:
        raise ValueError(f"clip threshold must be positive, got {clip}")
    norm = global_grad_norm(grads)
    if not np.isfinite(norm):
        raise FloatingPointError(f"non-finite gradient norm {norm}")
    scale = lr if norm <= clip else lr * (clip / norm)
    for name, g in grads.items():
        p = params[name]
        if isinstance(g, SparseRowGrad):
            p[g.rows] -= (scale * g.values).astype(p.dtype, copy=False)
        else:
            if g.shape != p.shape:
                raise ValueError(f"gradient shape mismatch for {name!r}")
            p -= (scale * g).astype(p.dtype, copy=False)
    return norm
