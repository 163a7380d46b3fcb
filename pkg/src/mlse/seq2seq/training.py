"""Mini-batch step and the full training loop with dev monitoring.

Dev-set evaluation (perplexity and similarity error) is monitoring
only: it consumes no training randomness and touches no parameters, so
toggling it cannot change the trained model.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..nn import SparseRowGrad, clip_and_sgd_step, merge_row_grads
from .model import ModelParams, decode_nll_batch, encode_backward, encode_batch, encode_corpus
from .schedule import PathSchedule, sample_path, validate_schedule

log = logging.getLogger(__name__)

LR_MIN_DEFAULT = 1e-4
BUCKET_WIDTH = 8

# Independent rng streams, keyed off the run seed.
STREAM_SHUFFLE = 20
STREAM_PATHS = 21
STREAM_DROPOUT = 22


@dataclass
class EpochRecord:
    epoch: int
    lr: float
    train_loss: float
    dev_ppl: dict
    dev_sim_error: float | None


def _accumulate(dense: dict, sparse: dict, grads: dict, scale: float):
    for name, g in grads.items():
        if isinstance(g, SparseRowGrad):
            part = g if scale == 1.0 else SparseRowGrad(g.rows, g.values * scale)
            sparse.setdefault(name, []).append(part)
        elif name in dense:
            dense[name] += g if scale == 1.0 else g * scale
        else:
            dense[name] = g if scale == 1.0 else g * scale


def train_minibatch(model: ModelParams, path, rows_by_lang: dict, lr: float,
                    clip: float, train_rng=None):
    """One optimizer step on a homogeneous mini-batch.

    rows_by_lang maps each language of the path to aligned token rows.
    Source embeddings are averaged when the path has several sources;
    the loss is the mean of the per-target NLLs. Returns (loss,
    grad_norm).
    """
    needed = path.languages()
    missing = [lang for lang in needed if lang not in rows_by_lang]
    if missing:
        raise ValueError(f"mini-batch is missing language columns {missing}")
    sizes = {len(rows_by_lang[lang]) for lang in needed}
    if len(sizes) != 1:
        raise ValueError(f"unaligned language columns, sizes {sorted(sizes)}")

    src_caches = []
    reprs = None
    for lang in path.sources:
        r, cache = encode_batch(model, rows_by_lang[lang], lang, train_rng)
        src_caches.append(cache)
        reprs = r if reprs is None else reprs + r
    combined = reprs if path.m == 1 else reprs / path.m

    dense: dict = {}
    sparse: dict = {}
    losses = []
    d_combined = np.zeros_like(combined)
    inv_n = 1.0 / path.n
    for lang in path.targets:
        loss, d_r, grads = decode_nll_batch(
            model, combined, rows_by_lang[lang], lang, train_rng
        )
        losses.append(loss)
        d_combined += d_r * inv_n
        _accumulate(dense, sparse, grads, inv_n)
    total_loss = float(np.mean(losses))
    if not np.isfinite(total_loss):
        raise FloatingPointError(f"training diverged: loss {total_loss}")

    d_src = d_combined if path.m == 1 else d_combined / path.m
    for cache in src_caches:
        _accumulate(dense, sparse, encode_backward(model, cache, d_src), 1.0)
    for name, parts in sparse.items():
        dense[name] = parts[0] if len(parts) == 1 else merge_row_grads(parts)
    norm = clip_and_sgd_step(model.params, dense, lr, clip)
    return total_loss, norm


def _length_bucketed_batches(lengths, order, batch_size: int):
    """Group a shuffled index stream into batches of similar length.

    Full batches are emitted in fill order; leftovers flush at the end
    in bucket order. Deterministic for a given order.
    """
    buckets: dict = {}
    batches = []
    for idx in order:
        key = int(lengths[idx]) // BUCKET_WIDTH
        bucket = buckets.setdefault(key, [])
        bucket.append(int(idx))
        if len(bucket) == batch_size:
            batches.append(list(bucket))
            bucket.clear()
    for key in sorted(buckets):
        if buckets[key]:
            batches.append(buckets[key])
    return batches


def _check_rows(model: ModelParams, rows, langs, what: str) -> int:
    sizes = set()
    for lang in langs:
        if lang not in rows:
            raise ValueError(f"{what} rows missing language {lang!r}")
        model.check_language(lang)
        sizes.add(len(rows[lang]))
    if len(sizes) != 1:
        raise ValueError(f"{what} rows are unaligned, sizes {sorted(sizes)}")
    return sizes.pop()


def dev_perplexity(model: ModelParams, dev_rows: dict, source_langs, target_langs,
                   batch_size: int = 128) -> dict:
    """Teacher-forced dev perplexity per decoder, dropout off.

    Each decoder is scored from every other source language's
    embedding; token-weighted so batch boundaries do not matter.
    """
    out = {}
    n_rows = len(dev_rows[target_langs[0]])
    for q in target_langs:
        total_nll = 0.0
        total_tokens = 0
        for p in source_langs:
            if p == q:
                continue
            for start in range(0, n_rows, batch_size):
                src = dev_rows[p][start : start + batch_size]
                tgt = dev_rows[q][start : start + batch_size]
                reprs, _ = encode_batch(model, src, p)
                loss, _, _ = decode_nll_batch(model, reprs, tgt, q, want_grads=False)
                n_tokens = sum(len(r) + 1 for r in tgt)
                total_nll += loss * n_tokens
                total_tokens += n_tokens
        if total_tokens:
            out[q] = float(np.exp(total_nll / total_tokens))
    return out


def dev_similarity_error(model: ModelParams, dev_rows: dict, langs, metric: str = "cosine",
                         batch_size: int = 128) -> float:
    """Average similarity-search error over all ordered language pairs."""
    from .. import simsearch

    mats = {
        lang: simsearch.EmbeddingMatrix(lang, encode_corpus(model, dev_rows[lang], lang, batch_size))
        for lang in langs
    }
    err = simsearch.similarity_error_matrix(mats, metric=metric)
    return simsearch.average_error(err, langs)


def format_epoch_header(target_langs) -> str:
    cols = ["epoch", "lr", "train_loss"]
    cols += [f"ppl.{q}" for q in target_langs]
    cols.append("sim_error")
    return "\t".join(cols)


def format_epoch_line(rec: EpochRecord, target_langs) -> str:
    cols = [str(rec.epoch), f"{rec.lr:.6g}", f"{rec.train_loss:.6f}"]
    for q in target_langs:
        ppl = rec.dev_ppl.get(q)
        cols.append("-" if ppl is None else f"{ppl:.4f}")
    cols.append("-" if rec.dev_sim_error is None else f"{rec.dev_sim_error:.6f}")
    return "\t".join(cols)


def run_training(
    model: ModelParams,
    train_rows: dict,
    dev_rows: dict,
    schedule: PathSchedule,
    epochs: int = 5,
    batch_size: int = 96,
    lr: float = 0.01,
    clip: float = 2.0,
    lr_min: float = LR_MIN_DEFAULT,
    seed: int = 0,
    eval_sim: bool = True,
    sim_metric: str = "cosine",
    embed_languages=None,
    log_stream=None,
):
    """Train over sampled homogeneous mini-batches; returns (model,
    records).

    Per epoch: shuffle rows, assemble length-bucketed batches, draw a
    path per batch, take SGD steps. Afterwards compute per-decoder dev
    perplexity (and, when eval_sim, dev similarity error); halve lr
    whenever the mean dev perplexity fails to improve on the best so
    far, stopping once lr drops below lr_min.
    """
    if epochs < 1 or batch_size < 1:
        raise ValueError("epochs and batch_size must be positive")
    langs = schedule.languages()
    eval_langs = tuple(embed_languages) if embed_languages else schedule.source_languages()
    validate_schedule(schedule, eval_langs)
    n_train = _check_rows(model, train_rows, langs, "train")
    _check_rows(model, dev_rows, langs, "dev")
    source_langs = schedule.source_languages()
    target_langs = schedule.target_languages()

    lengths = np.zeros(n_train, dtype=np.int64)
    for lang in langs:
        lengths = np.maximum(lengths, [len(r) for r in train_rows[lang]])

    if log_stream is not None:
        log_stream.write(format_epoch_header(target_langs) + "\n")
    records = []
    best_ppl = np.inf
    for epoch in range(1, epochs + 1):
        shuffle_rng = np.random.default_rng([seed, STREAM_SHUFFLE, epoch])
        path_rng = np.random.default_rng([seed, STREAM_PATHS, epoch])
        drop_rng = np.random.default_rng([seed, STREAM_DROPOUT, epoch])
        order = shuffle_rng.permutation(n_train)
        loss_sum = 0.0
        n_batches = 0
        for batch_idx in _length_bucketed_batches(lengths, order, batch_size):
            path = sample_path(schedule, path_rng)
            rows_by_lang = {
                lang: [train_rows[lang][i] for i in batch_idx]
                for lang in path.languages()
            }
            loss, _ = train_minibatch(model, path, rows_by_lang, lr, clip, drop_rng)
            loss_sum += loss
            n_batches += 1
        train_loss = loss_sum / n_batches

        ppl = dev_perplexity(model, dev_rows, source_langs, target_langs)
        sim_err = None
        if eval_sim and len(eval_langs) >= 2:
            sim_err = dev_similarity_error(model, dev_rows, eval_langs, sim_metric)
        rec = EpochRecord(epoch, lr, train_loss, ppl, sim_err)
        records.append(rec)
        if log_stream is not None:
            log_stream.write(format_epoch_line(rec, target_langs) + "\n")
        log.info("epoch %d: %s", epoch, format_epoch_line(rec, target_langs))

        agg = float(np.mean(list(ppl.values()))) if ppl else np.inf
        if agg >= best_ppl:
            lr *= 0.5
            if lr < lr_min:
                log.info("stopping: lr %g below %g", lr, lr_min)
                break
        else:
            best_ppl = agg
    return model, records
