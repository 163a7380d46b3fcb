"""Multi-encoder, multi-decoder sequence-to-sequence model.

One encoder and one decoder per language, all encoders mapping into a
shared fixed-size sentence representation. Decoders are teacher-forced
during training and never used afterwards. Gradients are computed by
hand; every path here is covered by finite-difference checks.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..nn import (
    EncoderConfig,
    LstmParams,
    SparseRowGrad,
    VARIANT_BIDIR,
    bilstm_backward,
    bilstm_forward,
    dropout_backward,
    dropout_forward,
    embed_tokens,
    embedding_grad,
    last_state_backward,
    last_state_repr,
    lstm_seq_backward,
    lstm_seq_forward,
    maxpool_time,
    maxpool_time_backward,
    softmax_xent_loss,
)

MIXED_LANGUAGE = "mixed"


@dataclass(frozen=True)
class DecoderConfig:
    """Stacked LSTM decoder shape, shared by every language."""

    depth: int = 1
    nhid: int = 512

    def __post_init__(self):
        if self.depth < 1 or self.nhid < 1:
            raise ValueError("decoder depth and nhid must be positive")


@dataclass
class SentenceEmbedding:
    """Fixed-size representation of one sentence."""

    values: np.ndarray
    language: str
    unit_norm: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.ndim != 1:
            raise ValueError("embedding values must be a vector")
        if not np.isfinite(self.values).all():
            raise ValueError("embedding contains non-finite values")
        if self.unit_norm:
            n = float(np.linalg.norm(self.values))
            if abs(n - 1.0) > 1e-6:
                raise ValueError(f"unit_norm embedding has norm {n}")

    @property
    def dim(self) -> int:
        return self.values.shape[0]


@dataclass
class ModelParams:
    """All trainable arrays, addressed by a flat name -> array dict.

    Naming: emb.<lang>; enc.<lang>.l<k>[.fwd|.bwd].{w_x,w_h,b};
    dec.<lang>.l<k>.{w_x,w_h,b}; dec.<lang>.out.{w,b}; bridge.{w,b}.
    vocab_sizes hold the tokenizer vocabulary per language; two extra
    rows are appended for the sentence-start and sentence-end symbols.
    """

    languages: tuple
    enc_config: EncoderConfig
    dec_config: DecoderConfig
    vocab_sizes: dict
    seed: int
    params: dict = field(default_factory=dict)

    @property
    def repr_dim(self) -> int:
        return self.enc_config.repr_dim

    def bos_id(self, lang: str) -> int:
        return self.vocab_sizes[lang]

    def eos_id(self, lang: str) -> int:
        return self.vocab_sizes[lang] + 1

    def table_rows(self, lang: str) -> int:
        return self.vocab_sizes[lang] + 2

    def dtype(self):
        return self.params[f"emb.{self.languages[0]}"].dtype

    def check_language(self, lang: str):
        if lang not in self.languages:
            raise ValueError(f"unknown language {lang!r}")


def _uniform(rng, shape, dtype, scale=0.1):
    return rng.uniform(-scale, scale, size=shape).astype(dtype)


# LSTM cells keep the conventional uniform(-0.1, 0.1) init. The lookup
# tables, output projections, and bridge start wider: at small hidden
# sizes a +-0.1 init leaves hidden activations (and therefore every
# gradient that must travel encoder-ward through the softmax) two
# orders of magnitude below the bias gradients, and the joint model
# stalls at the unconditional unigram floor for its whole budget.
EMB_INIT_SCALE = 0.8
OUT_INIT_SCALE = 0.3
BRIDGE_INIT_SCALE = 0.3


def init_model(
    languages,
    enc_config: EncoderConfig,
    dec_config: DecoderConfig,
    vocab_sizes,
    seed: int,
    dtype=np.float32,
) -> ModelParams:
    """Build freshly initialized parameters, deterministic given seed."""
    languages = tuple(languages)
    if len(languages) < 2:
        raise ValueError("a joint model needs at least 2 languages")
    if len(set(languages)) != len(languages):
        raise ValueError("duplicate language in model declaration")
    if isinstance(vocab_sizes, int):
        vocab_sizes = {lang: vocab_sizes for lang in languages}
    for lang in languages:
        if lang not in vocab_sizes:
            raise ValueError(f"no vocabulary size for language {lang!r}")
        if vocab_sizes[lang] < 1:
            raise ValueError(f"empty vocabulary for language {lang!r}")
    vocab_sizes = {lang: int(vocab_sizes[lang]) for lang in languages}

    rng = np.random.default_rng([seed, 10])
    emb_dim = enc_config.emb_dim
    d = enc_config.repr_dim
    params: dict = {}
    for lang in languages:
        params[f"emb.{lang}"] = _uniform(
            rng, (vocab_sizes[lang] + 2, emb_dim), dtype, EMB_INIT_SCALE
        )
    for lang in languages:
        for layer in range(enc_config.depth):
            if layer == 0:
                in_dim = emb_dim
            elif enc_config.variant == VARIANT_BIDIR:
                in_dim = 2 * enc_config.nhid
            else:
                in_dim = enc_config.nhid
            prefix = f"enc.{lang}.l{layer}"
            if enc_config.variant == VARIANT_BIDIR:
                for direction in ("fwd", "bwd"):
                    p = LstmParams.init(in_dim, enc_config.nhid, rng, dtype=dtype)
                    params[f"{prefix}.{direction}.w_x"] = p.w_x
                    params[f"{prefix}.{direction}.w_h"] = p.w_h
                    params[f"{prefix}.{direction}.b"] = p.b
            else:
                p = LstmParams.init(in_dim, enc_config.nhid, rng, dtype=dtype)
                params[f"{prefix}.w_x"] = p.w_x
                params[f"{prefix}.w_h"] = p.w_h
                params[f"{prefix}.b"] = p.b
    for lang in languages:
        for layer in range(dec_config.depth):
            in_dim = emb_dim + d if layer == 0 else dec_config.nhid
            p = LstmParams.init(in_dim, dec_config.nhid, rng, dtype=dtype)
            prefix = f"dec.{lang}.l{layer}"
            params[f"{prefix}.w_x"] = p.w_x
            params[f"{prefix}.w_h"] = p.w_h
            params[f"{prefix}.b"] = p.b
        params[f"dec.{lang}.out.w"] = _uniform(
            rng, (dec_config.nhid, vocab_sizes[lang] + 2), dtype, OUT_INIT_SCALE
        )
        params[f"dec.{lang}.out.b"] = _uniform(rng, (vocab_sizes[lang] + 2,), dtype)
    params["bridge.w"] = _uniform(
        rng, (d, 2 * dec_config.depth * dec_config.nhid), dtype, BRIDGE_INIT_SCALE
    )
    params["bridge.b"] = _uniform(
        rng, (2 * dec_config.depth * dec_config.nhid,), dtype, BRIDGE_INIT_SCALE
    )
    return ModelParams(languages, enc_config, dec_config, vocab_sizes, seed, params)


def _lstm_params(params: dict, prefix: str) -> LstmParams:
    return LstmParams(
        params[f"{prefix}.w_x"], params[f"{prefix}.w_h"], params[f"{prefix}.b"]
    )


def _pad_rows(rows, dtype):
    """Right-pad integer token rows: (ids, mask, lengths)."""
    if not rows:
        raise ValueError("empty batch")
    lengths = np.array([len(r) for r in rows], dtype=np.int64)
    if (lengths == 0).any():
        raise ValueError("cannot encode an empty sentence")
    B = len(rows)
    T = int(lengths.max())
    ids = np.zeros((B, T), dtype=np.int64)
    mask = np.zeros((B, T), dtype=dtype)
    for b, r in enumerate(rows):
        ids[b, : len(r)] = r
        mask[b, : len(r)] = 1.0
    return ids, mask, lengths


def encode_batch(model: ModelParams, rows, lang: str, train_rng=None):
    """Encode a batch of token-id rows into (B, d) representations.

    train_rng enables vertical dropout on every layer input; pass None
    for evaluation. Returns (reprs, cache) with cache consumed by
    encode_backward.
    """
    model.check_language(lang)
    cfg = model.enc_config
    dtype = model.dtype()
    table = model.params[f"emb.{lang}"]
    ids, mask, lengths = _pad_rows(rows, dtype)
    # Start/end symbols are decoder-side only; encoder input must stay
    # within the tokenizer vocabulary.
    if int(ids.min()) < 0 or int(ids.max()) >= model.vocab_sizes[lang]:
        raise ValueError(f"token id out of range for language {lang!r}")
    x = embed_tokens(table, ids)
    layer_caches = []
    h = x
    for layer in range(cfg.depth):
        h, keep = dropout_forward(h, cfg.dropout_p, train_rng)
        prefix = f"enc.{lang}.l{layer}"
        if cfg.variant == VARIANT_BIDIR:
            p_f = _lstm_params(model.params, f"{prefix}.fwd")
            p_b = _lstm_params(model.params, f"{prefix}.bwd")
            h_seq, cache = bilstm_forward(h, mask, p_f, p_b)
        else:
            p = _lstm_params(model.params, prefix)
            h_seq, _, cache = lstm_seq_forward(h, mask, p)
        layer_caches.append((keep, cache))
        h = h_seq
    if cfg.variant == VARIANT_BIDIR:
        reprs, pool_cache = maxpool_time(h, mask)
    else:
        reprs, pool_cache = last_state_repr(h, lengths)
    full_cache = (lang, ids, mask, lengths, layer_caches, pool_cache)
    return reprs, full_cache


def encode_backward(model: ModelParams, cache, d_reprs) -> dict:
    """Gradients of encoder parameters and embedding rows."""
    lang, ids, mask, lengths, layer_caches, pool_cache = cache
    cfg = model.enc_config
    if cfg.variant == VARIANT_BIDIR:
        d_hseq = maxpool_time_backward(d_reprs, pool_cache)
    else:
        d_hseq = last_state_backward(d_reprs, pool_cache)
    grads: dict = {}
    for layer in range(cfg.depth - 1, -1, -1):
        keep, layer_cache = layer_caches[layer]
        prefix = f"enc.{lang}.l{layer}"
        if cfg.variant == VARIANT_BIDIR:
            dx, g_f, g_b = bilstm_backward(d_hseq, layer_cache)
            grads[f"{prefix}.fwd.w_x"] = g_f.w_x
            grads[f"{prefix}.fwd.w_h"] = g_f.w_h
            grads[f"{prefix}.fwd.b"] = g_f.b
            grads[f"{prefix}.bwd.w_x"] = g_b.w_x
            grads[f"{prefix}.bwd.w_h"] = g_b.w_h
            grads[f"{prefix}.bwd.b"] = g_b.b
        else:
            dx, _, _, g = lstm_seq_backward(d_hseq, layer_cache)
            grads[f"{prefix}.w_x"] = g.w_x
            grads[f"{prefix}.w_h"] = g.w_h
            grads[f"{prefix}.b"] = g.b
        d_hseq = dropout_backward(dx, keep)
    table = model.params[f"emb.{lang}"]
    rows_idx, row_grads = embedding_grad(table.shape, ids, d_hseq, table.dtype)
    grads[f"emb.{lang}"] = SparseRowGrad(rows_idx, row_grads)
    return grads


def encode(model: ModelParams, sentence, lang: str) -> SentenceEmbedding:
    """Encode one sentence (token-id sequence) with dropout disabled."""
    tokens = list(getattr(sentence, "tokens", sentence))
    reprs, _ = encode_batch(model, [tokens], lang, train_rng=None)
    return SentenceEmbedding(values=reprs[0], language=lang)


def encode_corpus(model: ModelParams, rows, lang: str, batch_size: int = 128):
    """Encode many rows (dropout off) into an (S, d) float matrix."""
    outs = []
    for start in range(0, len(rows), batch_size):
        reprs, _ = encode_batch(model, rows[start : start + batch_size], lang)
        outs.append(reprs)
    return np.concatenate(outs, axis=0)


def combine_avg(embeddings) -> SentenceEmbedding:
    """Element-wise mean of several sentence embeddings."""
    if not embeddings:
        raise ValueError("combine_avg needs at least one embedding")
    dims = {e.dim for e in embeddings}
    if len(dims) != 1:
        raise ValueError(f"embedding dimension mismatch: {sorted(dims)}")
    stacked = np.stack([e.values for e in embeddings])
    return SentenceEmbedding(values=stacked.mean(axis=0), language=MIXED_LANGUAGE)


def _decoder_io(model: ModelParams, rows, lang: str, dtype):
    """Teacher-forcing tensors: input ids (start + tokens), target ids
    (tokens + end), and the target mask."""
    bos = model.bos_id(lang)
    eos = model.eos_id(lang)
    B = len(rows)
    if B == 0:
        raise ValueError("empty batch")
    lengths = np.array([len(r) + 1 for r in rows], dtype=np.int64)
    T = int(lengths.max())
    in_ids = np.zeros((B, T), dtype=np.int64)
    tgt_ids = np.zeros((B, T), dtype=np.int64)
    mask = np.zeros((B, T), dtype=dtype)
    for b, r in enumerate(rows):
        n = len(r)
        in_ids[b, 0] = bos
        in_ids[b, 1 : n + 1] = r
        tgt_ids[b, :n] = r
        tgt_ids[b, n] = eos
        mask[b, : n + 1] = 1.0
    return in_ids, tgt_ids, mask


def decode_nll_batch(
    model: ModelParams,
    reprs,
    rows,
    lang: str,
    train_rng=None,
    want_grads: bool = True,
):
    """Teacher-forced mean NLL of rows given (B, d) representations.

    The representation initializes every decoder layer through the
    affine bridge and is concatenated to the input embedding at each
    timestep. Returns (loss, d_reprs, grads); the latter two are None
    when want_grads is False.
    """
    model.check_language(lang)
    cfg = model.dec_config
    dtype = model.dtype()
    reprs = np.asarray(reprs)
    B = len(rows)
    if reprs.shape[0] != B:
        raise ValueError("representation count does not match batch size")
    d = model.repr_dim
    if reprs.shape[1] != d:
        raise ValueError(f"representation dim {reprs.shape[1]}, expected {d}")
    table = model.params[f"emb.{lang}"]
    in_ids, tgt_ids, mask = _decoder_io(model, rows, lang, dtype)
    T = in_ids.shape[1]
    H = cfg.nhid

    states = reprs @ model.params["bridge.w"] + model.params["bridge.b"]
    in_emb = embed_tokens(table, in_ids)
    rep_tile = np.broadcast_to(reprs[:, None, :], (B, T, d))
    x = np.concatenate([in_emb, rep_tile], axis=2)

    layer_caches = []
    h = x
    for layer in range(cfg.depth):
        h, keep = dropout_forward(h, model.enc_config.dropout_p, train_rng)
        h0 = states[:, 2 * layer * H : (2 * layer + 1) * H]
        c0 = states[:, (2 * layer + 1) * H : (2 * layer + 2) * H]
        p = _lstm_params(model.params, f"dec.{lang}.l{layer}")
        h_seq, _, cache = lstm_seq_forward(h, mask, p, h0=h0, c0=c0)
        layer_caches.append((keep, cache))
        h = h_seq
    ow = model.params[f"dec.{lang}.out.w"]
    ob = model.params[f"dec.{lang}.out.b"]
    logits = h @ ow + ob
    loss, dlogits, _ = softmax_xent_loss(logits, tgt_ids, mask)
    if not want_grads:
        return loss, None, None

    grads: dict = {}
    flat_h = h.reshape(B * T, H)
    flat_dl = dlogits.reshape(B * T, -1)
    grads[f"dec.{lang}.out.w"] = flat_h.T @ flat_dl
    grads[f"dec.{lang}.out.b"] = flat_dl.sum(axis=0)
    d_hseq = (flat_dl @ ow.T).reshape(B, T, H)
    d_states = np.empty_like(states)
    for layer in range(cfg.depth - 1, -1, -1):
        keep, cache = layer_caches[layer]
        dx, dh0, dc0, g = lstm_seq_backward(d_hseq, cache)
        prefix = f"dec.{lang}.l{layer}"
        grads[f"{prefix}.w_x"] = g.w_x
        grads[f"{prefix}.w_h"] = g.w_h
        grads[f"{prefix}.b"] = g.b
        d_states[:, 2 * layer * H : (2 * layer + 1) * H] = dh0
        d_states[:, (2 * layer + 1) * H : (2 * layer + 2) * H] = dc0
        d_hseq = dropout_backward(dx, keep)
    d_emb_in = d_hseq[:, :, : table.shape[1]]
    d_reprs = d_hseq[:, :, table.shape[1] :].sum(axis=1)
    grads["bridge.w"] = reprs.T @ d_states
    grads["bridge.b"] = d_states.sum(axis=0)
    d_reprs = d_reprs + d_states @ model.params["bridge.w"].T
    rows_idx, row_grads = embedding_grad(table.shape, in_ids, d_emb_in, table.dtype)
    grads[f"emb.{lang}"] = SparseRowGrad(rows_idx, row_grads)
    return loss, d_reprs, grads


def decode_nll(model: ModelParams, embedding, target, lang: str):
    """Single-sentence decode_nll_batch wrapper.

    embedding may be a SentenceEmbedding or a raw vector. The returned
    gradient dict additionally holds key "repr" with the gradient of
    the loss with respect to the embedding values.
    """
    values = embedding.values if isinstance(embedding, SentenceEmbedding) else embedding
    values = np.asarray(values)
    tokens = list(getattr(target, "tokens", target))
    loss, d_reprs, grads = decode_nll_batch(model, values[None, :], [tokens], lang)
    grads["repr"] = d_reprs[0]
    return loss, grads
