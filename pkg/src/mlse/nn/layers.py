"""Recurrent layers with explicit backward passes.

Everything here is plain numpy over batch-first arrays. Sequences are
right-padded; a (B, T) 0/1 mask marks valid timesteps, and state
updates are gated by the mask so padded positions leave hidden and
cell states untouched. That makes padded-batch results match
single-sentence runs element for element.

Gate layout inside the fused weight matrices is [input, forget,
output, candidate], each block of width nhid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class LstmParams:
    """Fused gate weights for one LSTM direction.

    w_x: (input_dim, 4*nhid)  input-to-hidden
    w_h: (nhid, 4*nhid)       hidden-to-hidden
    b:   (4*nhid,)
    """

    w_x: np.ndarray
    w_h: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        nhid = self.nhid
        if self.w_x.shape[1] != 4 * nhid or self.b.shape != (4 * nhid,):
            raise ValueError("inconsistent LSTM parameter shapes")
        if nhid < 1:
            raise ValueError("nhid must be >= 1")

    @property
    def nhid(self) -> int:
        return self.w_h.shape[0]

    @property
    def input_dim(self) -> int:
        return self.w_x.shape[0]

    @staticmethod
    def init(input_dim: int, nhid: int, rng: np.random.Generator,
             dtype=np.float32, scale: float = 0.1,
             forget_bias: float = 1.0) -> "LstmParams":
        w_x = rng.uniform(-scale, scale, (input_dim, 4 * nhid)).astype(dtype)
        w_h = rng.uniform(-scale, scale, (nhid, 4 * nhid)).astype(dtype)
        b = np.zeros(4 * nhid, dtype=dtype)
        b[nhid : 2 * nhid] = forget_bias
        return LstmParams(w_x, w_h, b)


def lstm_cell_step(x, h_prev, c_prev, p: LstmParams):
    """One LSTM cell update; accepts single vectors or (B, ·) batches."""
    single = x.ndim == 1
    if single:
        x, h_prev, c_prev = x[None, :], h_prev[None, :], c_prev[None, :]
    if x.shape[1] != p.input_dim or h_prev.shape[1] != p.nhid:
        raise ValueError(
            f"shape mismatch: x {x.shape}, h {h_prev.shape}, "
            f"params ({p.input_dim}, {p.nhid})"
        )
    nh = p.nhid
    z = x @ p.w_x + h_prev @ p.w_h + p.b
    i = sigmoid(z[:, :nh])
    f = sigmoid(z[:, nh : 2 * nh])
    o = sigmoid(z[:, 2 * nh : 3 * nh])
    g = np.tanh(z[:, 3 * nh :])
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    if single:
        return h[0], c[0]
    return h, c


def lstm_seq_forward(x, mask, p: LstmParams, h0=None, c0=None):
    """Run one direction over a padded batch.

    x: (B, T, input_dim); mask: (B, T) in {0, 1}.
    Returns (h_seq (B, T, nhid), (h_T, c_T), cache).
    """
    B, T, _ = x.shape
    nh = p.nhid
    dtype = x.dtype
    h = np.zeros((B, nh), dtype) if h0 is None else h0
    c = np.zeros((B, nh), dtype) if c0 is None else c0
    h_seq = np.empty((B, T, nh), dtype)
    # Input projection for all timesteps in one gemm.
    zx = (x.reshape(B * T, -1) @ p.w_x).reshape(B, T, 4 * nh) + p.b
    mask_f = mask.astype(dtype)
    steps = []
    for t in range(T):
        m = mask_f[:, t][:, None]
        z = zx[:, t] + h @ p.w_h
        i = sigmoid(z[:, :nh])
        f = sigmoid(z[:, nh : 2 * nh])
        o = sigmoid(z[:, 2 * nh : 3 * nh])
        g = np.tanh(z[:, 3 * nh :])
        c_new = f * c + i * g
        tanh_c = np.tanh(c_new)
        h_new = o * tanh_c
        steps.append((h, c, i, f, o, g, tanh_c, m))
        c = m * c_new + (1.0 - m) * c
        h = m * h_new + (1.0 - m) * h
        h_seq[:, t] = h
    cache = (x, p, steps)
    return h_seq, (h, c), cache


def lstm_seq_backward(d_hseq, cache, d_hT=None, d_cT=None):
    """Backprop through lstm_seq_forward.

    d_hseq: (B, T, nhid) gradient on the per-step outputs; d_hT/d_cT:
    optional gradients on the final state (decoder bridge path).
    Returns (dx, dh0, dc0, grads) with grads an LstmParams of the same
    shapes.
    """
    x, p, steps = cache
    B, T, _ = x.shape
    nh = p.nhid
    dtype = x.dtype
    dw_h = np.zeros_like(p.w_h)
    dz_all = np.empty((B, T, 4 * nh), dtype)
    dh_next = np.zeros((B, nh), dtype) if d_hT is None else d_hT.astype(dtype).copy()
    dc_next = np.zeros((B, nh), dtype) if d_cT is None else d_cT.astype(dtype).copy()
    for t in range(T - 1, -1, -1):
        h_prev, c_prev, i, f, o, g, tanh_c, m = steps[t]
        dh = d_hseq[:, t] + dh_next
        dc = dc_next
        dh_new = dh * m
        dc_new = dc * m
        dh_prev = dh * (1.0 - m)
        dc_prev = dc * (1.0 - m)
        do = dh_new * tanh_c
        dc_new = dc_new + dh_new * o * (1.0 - tanh_c * tanh_c)
        df = dc_new * c_prev
        dc_prev += dc_new * f
        di = dc_new * g
        dg = dc_new * i
        dz = dz_all[:, t]
        dz[:, :nh] = di * i * (1.0 - i)
        dz[:, nh : 2 * nh] = df * f * (1.0 - f)
        dz[:, 2 * nh : 3 * nh] = do * o * (1.0 - o)
        dz[:, 3 * nh :] = dg * (1.0 - g * g)
        dw_h += h_prev.T @ dz
        dh_next = dh_prev + dz @ p.w_h.T
        dc_next = dc_prev
    dz_flat = dz_all.reshape(B * T, 4 * nh)
    dw_x = x.reshape(B * T, -1).T @ dz_flat
    db = dz_flat.sum(axis=0)
    dx = (dz_flat @ p.w_x.T).reshape(x.shape)
    return dx, dh_next, dc_next, LstmParams(dw_x, dw_h, db)


def bilstm_forward(x, mask, p_fwd: LstmParams, p_bwd: LstmParams):
    """Left-to-right and right-to-left passes, concatenated per step.

    Returns (h (B, T, 2*nhid), cache). The backward direction runs on
    the time-flipped batch; with masked state updates this is exactly a
    per-sentence reversal regardless of padding.
    """
    hf, _, cache_f = lstm_seq_forward(x, mask, p_fwd)
    x_rev = x[:, ::-1]
    mask_rev = mask[:, ::-1]
    hb_rev, _, cache_b = lstm_seq_forward(x_rev, mask_rev, p_bwd)
    hb = hb_rev[:, ::-1]
    h = np.concatenate([hf, hb], axis=2)
    return h, (cache_f, cache_b, p_fwd.nhid)


def bilstm_backward(d_h, cache):
    cache_f, cache_b, nh = cache
    d_hf = d_h[:, :, :nh]
    d_hb = d_h[:, :, nh:]
    dx_f, _, _, g_f = lstm_seq_backward(d_hf, cache_f)
    dx_b_rev, _, _, g_b = lstm_seq_backward(
        np.ascontiguousarray(d_hb[:, ::-1]), cache_b
    )
    dx = dx_f + dx_b_rev[:, ::-1]
    return dx, g_f, g_b


def maxpool_time(h, mask):
    """Element-wise max over valid timesteps.

    h: (B, T, D); mask: (B, T). Returns (pooled (B, D), cache). The
    backward pass routes each output gradient to the argmax timestep
    only, lowest index on ties.
    """
    if not mask.any(axis=1).all():
        raise ValueError("maxpool_time needs at least one valid timestep per row")
    neg = np.where(mask[:, :, None].astype(bool), h, -np.inf)
    arg = neg.argmax(axis=1)  # (B, D); np.argmax already takes the lowest tie
    pooled = np.take_along_axis(h, arg[:, None, :], axis=1)[:, 0, :]
    return pooled, (arg, h.shape)


def maxpool_time_backward(d_pooled, cache):
    arg, shape = cache
    dh = np.zeros(shape, dtype=d_pooled.dtype)
    B, _, D = shape
    # Each (b, d) pair routes to exactly one timestep, so plain fancy
    # assignment is enough (no colliding indices to accumulate).
    dh[np.arange(B)[:, None], arg, np.arange(D)[None, :]] = d_pooled
    return dh


def last_state_repr(h, lengths):
    """Top-layer hidden state at each sentence's final valid timestep."""
    lengths = np.asarray(lengths)
    if (lengths < 1).any():
        raise ValueError("zero-length sentence has no last state")
    B = h.shape[0]
    out = h[np.arange(B), lengths - 1]
    return out, (lengths, h.shape)


def last_state_backward(d_out, cache):
    lengths, shape = cache
    dh = np.zeros(shape, dtype=d_out.dtype)
    dh[np.arange(shape[0]), lengths - 1] = d_out
    return dh


def dropout_forward(x, p: float, rng: np.random.Generator | None):
    """Inverted dropout; identity when rng is None (eval) or p == 0."""
    if rng is None or p <= 0.0:
        return x, None
    keep = (rng.random(x.shape) >= p).astype(x.dtype) / (1.0 - p)
    return x * keep, keep


def dropout_backward(d_out, keep):
    if keep is None:
        return d_out
    return d_out * keep


def embed_tokens(table, ids):
    """Gather rows: table (V, E), ids (B, T) -> (B, T, E)."""
    return table[ids]


def embedding_grad(table_shape, ids, d_embedded, dtype):
    """Sparse gradient for an embedding gather: unique rows + grads."""
    flat_ids = ids.ravel()
    flat_d = d_embedded.reshape(-1, d_embedded.shape[-1])
    uniq, inverse = np.unique(flat_ids, return_inverse=True)
    rows = np.zeros((uniq.size, table_shape[1]), dtype=dtype)
    np.add.at(rows, inverse, flat_d)
    return uniq, rows
