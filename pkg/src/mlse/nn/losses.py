"""Cross-entropy over output projections, with masking.

Gradients are returned for the logits so callers can chain into the
projection and decoder backward passes.
"""
from __future__ import annotations

import numpy as np


def log_softmax(logits):
    """Numerically stable log-softmax over the last axis."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax_xent_loss(logits, targets, mask=None):
    """Mean negative log-likelihood over unmasked positions.

    logits: (..., V); targets: integer array matching logits[..., 0];
    mask: same shape as targets, 1 for real positions. Returns
    (loss, dlogits, n_tokens) where dlogits is the gradient of the
    mean loss and already zeroed at masked positions.
    """
    logits = np.asarray(logits)
    targets = np.asarray(targets)
    if targets.shape != logits.shape[:-1]:
        raise ValueError(
            f"targets shape {targets.shape} does not match logits {logits.shape}"
        )
    if mask is None:
        mask_f = np.ones(targets.shape, dtype=logits.dtype)
    else:
        mask_f = np.asarray(mask).astype(logits.dtype)
    n_tokens = float(mask_f.sum())
    if n_tokens <= 0:
        raise ValueError("softmax_xent_loss needs at least one unmasked target")
    logp = log_softmax(logits)
    picked = np.take_along_axis(logp, targets[..., None], axis=-1)[..., 0]
    loss = -float((picked * mask_f).sum()) / n_tokens
    dlogits = np.exp(logp)
    flat = dlogits.reshape(-1, dlogits.shape[-1])
    flat[np.arange(flat.shape[0]), targets.ravel()] -= 1.0
    dlogits *= (mask_f / n_tokens)[..., None]
    return loss, dlogits, int(n_tokens)


def perplexity(mean_nll: float) -> float:
    """exp of the per-token negative log-likelihood."""
    return float(np.exp(mean_nll))
