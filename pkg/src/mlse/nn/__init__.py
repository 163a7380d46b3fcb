"""Numeric building blocks: LSTM layers, losses, SGD, grad checking."""
from __future__ import annotations

from dataclasses import dataclass

from .gradcheck import finite_diff_check
from .layers import (
    LstmParams,
    bilstm_backward,
    bilstm_forward,
    dropout_backward,
    dropout_forward,
    embed_tokens,
    embedding_grad,
    last_state_backward,
    last_state_repr,
    lstm_cell_step,
    lstm_seq_backward,
    lstm_seq_forward,
    maxpool_time,
    maxpool_time_backward,
    sigmoid,
)
from .losses import log_softmax, perplexity, softmax_xent_loss
from .optim import SparseRowGrad, clip_and_sgd_step, global_grad_norm, merge_row_grads

VARIANT_LAST = "stacked-last-state"
VARIANT_BIDIR = "bidirectional-maxpool"


@dataclass(frozen=True)
class EncoderConfig:
    """Shape of every encoder (and the matching decoders) in a model."""

    variant: str = VARIANT_BIDIR
    depth: int = 1
    nhid: int = 512
    emb_dim: int = 384
    dropout_p: float = 0.2

    def __post_init__(self):
        if self.variant not in (VARIANT_LAST, VARIANT_BIDIR):
            raise ValueError(f"unknown encoder variant {self.variant!r}")
        if self.depth < 1 or self.nhid < 1 or self.emb_dim < 1:
            raise ValueError("depth, nhid and emb_dim must be positive")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError(f"dropout_p must be in [0, 1), got {self.dropout_p}")

    @property
    def repr_dim(self) -> int:
        """Joint embedding width: doubled for the bidirectional pool."""
        if self.variant == VARIANT_BIDIR:
            return 2 * self.nhid
        return self.nhid


__all__ = [
    "EncoderConfig",
    "LstmParams",
    "SparseRowGrad",
    "VARIANT_BIDIR",
    "VARIANT_LAST",
    "bilstm_backward",
    "bilstm_forward",
    "clip_and_sgd_step",
    "dropout_backward",
    "dropout_forward",
    "embed_tokens",
    "embedding_grad",
    "finite_diff_check",
    "global_grad_norm",
    "last_state_backward",
    "last_state_repr",
    "log_softmax",
    "lstm_cell_step",
    "lstm_seq_backward",
    "lstm_seq_forward",
    "maxpool_time",
    "maxpool_time_backward",
    "merge_row_grads",
    "perplexity",
    "sigmoid",
    "softmax_xent_loss",
]
