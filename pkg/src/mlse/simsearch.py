"""Exact multilingual similarity search.

For every sentence of language p, find its nearest neighbor among
language q's embeddings; count an error whenever that neighbor is not
the aligned translation. Search is exact brute force, blocked so the
working set stays cache-resident at large scale.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

METRICS = ("l2", "inner_product", "cosine")
METRIC_ALIASES = {"ip": "inner_product"}
DEFAULT_METRIC = "cosine"
DEFAULT_BLOCK = 4096

EMB_MAGIC = b"EMB1"


def canon_metric(metric: str) -> str:
    metric = METRIC_ALIASES.get(metric, metric)
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}, expected one of {METRICS}")
    return metric


@dataclass
class EmbeddingMatrix:
    """S embeddings of dimension d for one language."""

    language: str
    data: np.ndarray
    _norms: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data)
        if self.data.ndim != 2 or self.data.shape[0] < 1:
            raise ValueError("embedding matrix must be (S >= 1, d)")
        if not np.isfinite(self.data).all():
            raise ValueError("embedding matrix contains non-finite values")

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    @property
    def norms(self) -> np.ndarray:
        if self._norms is None:
            self._norms = np.sqrt((self.data * self.data).sum(axis=1))
        return self._norms


@dataclass
class ErrorMatrix:
    """Pairwise search errors; diagonal undefined (nan)."""

    languages: tuple
    errors: np.ndarray

    def get(self, p: str, q: str) -> float:
        return float(self.errors[self.languages.index(p), self.languages.index(q)])


def _as_matrix(m) -> EmbeddingMatrix:
    if isinstance(m, EmbeddingMatrix):
        return m
    return EmbeddingMatrix("", np.asarray(m))


def distance(x, y, metric: str = DEFAULT_METRIC) -> float:
    """l2 norm of the difference, negated inner product, or 1 - cosine.

    All three are distances: the nearest neighbor is the argmin.
    """
    metric = canon_metric(metric)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("distance needs two equal-length vectors")
    if metric == "l2":
        return float(np.linalg.norm(x - y))
    if metric == "inner_product":
        return float(-np.dot(x, y))
    nx = float(np.linalg.norm(x))
    ny = float(np.linalg.norm(y))
    if nx == 0.0 or ny == 0.0:
        raise ValueError("cosine distance is undefined for zero vectors")
    return float(1.0 - np.dot(x, y) / (nx * ny))


def pairwise_scores_blocked(
    queries,
    candidates,
    metric: str = DEFAULT_METRIC,
    block_size: int = DEFAULT_BLOCK,
    topk: int | None = None,
):
    """Streaming exact argmin of every query against all candidates.

    Returns (indices, distances): shape (Sq,) for the argmin, or
    (Sq, k) sorted by ascending distance when topk is given. Ties
    resolve to the lowest candidate index.

    One gemm per block pair; cosine runs as an inner product on
    unit-normalized copies, l2 through the squared-norm expansion, so
    the post-gemm pass is a bare argmin/argmax. Reported distances are
    recomputed per winner in double precision, which keeps them
    independent of block_size and free of the expansion's cancellation
    error.
    """
    metric = canon_metric(metric)
    Q = _as_matrix(queries)
    M = _as_matrix(candidates)
    if Q.dim != M.dim:
        raise ValueError(f"dimension mismatch: queries {Q.dim}, candidates {M.dim}")
    if block_size < 1:
        raise ValueError("block_size must be positive")
    if topk is not None and not 1 <= topk <= M.rows:
        raise ValueError(f"k must be in [1, {M.rows}], got {topk}")
    if metric == "cosine" and (float(Q.norms.min()) == 0.0 or float(M.norms.min()) == 0.0):
        raise ValueError("cosine metric is undefined for zero-norm rows")

    Sq, Sm = Q.rows, M.rows
    dtype = np.result_type(Q.data.dtype, M.data.dtype, np.float32)
    qdata = np.ascontiguousarray(Q.data, dtype=dtype)
    mdata = np.ascontiguousarray(M.data, dtype=dtype)
    if metric == "cosine":
        qdata = qdata / Q.norms[:, None].astype(dtype)
        mdata = mdata / M.norms[:, None].astype(dtype)
    maximize = metric in ("cosine", "inner_product")
    if metric == "l2":
        q_sq = (Q.norms * Q.norms).astype(dtype)
        m_sq = (M.norms * M.norms).astype(dtype)

    k = 1 if topk is None else topk
    q_blk = min(block_size, 1024)
    best_vals = np.full((Sq, k), -np.inf if maximize else np.inf, dtype=dtype)
    best_idx = np.zeros((Sq, k), dtype=np.int64)
    buf = np.empty((min(q_blk, Sq), min(block_size, Sm)), dtype=dtype)
    rows_all = np.arange(min(q_blk, Sq))
    for q0 in range(0, Sq, q_blk):
        q1 = min(q0 + q_blk, Sq)
        qb = qdata[q0:q1]
        nq = q1 - q0
        for m0 in range(0, Sm, block_size):
            m1 = min(m0 + block_size, Sm)
            dots = buf[:nq, : m1 - m0]
            np.matmul(qb, mdata[m0:m1].T, out=dots)
            if metric == "l2":
                dots *= -2.0
                dots += q_sq[q0:q1, None]
                dots += m_sq[None, m0:m1]
                np.maximum(dots, 0.0, out=dots)
            if k == 1:
                if maximize:
                    arg = dots.argmax(axis=1)
                    vals = dots[rows_all[:nq], arg]
                    better = vals > best_vals[q0:q1, 0]
                else:
                    arg = dots.argmin(axis=1)
                    vals = dots[rows_all[:nq], arg]
                    better = vals < best_vals[q0:q1, 0]
                best_vals[q0:q1, 0][better] = vals[better]
                best_idx[q0:q1, 0][better] = arg[better] + m0
            else:
                key = -dots if maximize else dots
                kk = min(k, key.shape[1])
                # Lexicographic (key, index) order keeps ties on the
                # lowest index and makes the merge block-size invariant.
                col = np.broadcast_to(np.arange(m0, m1), key.shape)
                order = np.lexsort((col, key), axis=1)[:, :kk]
                block_keys = np.take_along_axis(key, order, axis=1)
                prev_keys = -best_vals[q0:q1] if maximize else best_vals[q0:q1]
                cand_keys = np.concatenate([prev_keys, block_keys], axis=1)
                cand_idx = np.concatenate([best_idx[q0:q1], order + m0], axis=1)
                sel = np.lexsort((cand_idx, cand_keys), axis=1)[:, :k]
                merged = np.take_along_axis(cand_keys, sel, axis=1)
                best_vals[q0:q1] = -merged if maximize else merged
                best_idx[q0:q1] = np.take_along_axis(cand_idx, sel, axis=1)
    distances = np.empty((Sq, k), dtype=np.float64)
    for q0 in range(0, Sq, 65536):
        q1 = min(q0 + 65536, Sq)
        qb = Q.data[q0:q1, None, :].astype(np.float64)
        cb = M.data[best_idx[q0:q1]].astype(np.float64)
        if metric == "l2":
            distances[q0:q1] = np.linalg.norm(qb - cb, axis=2)
        else:
            dots = (qb * cb).sum(axis=2)
            if metric == "inner_product":
                distances[q0:q1] = -dots
            else:
                qn = Q.norms[q0:q1, None].astype(np.float64)
                cn = M.norms[best_idx[q0:q1]].astype(np.float64)
                distances[q0:q1] = 1.0 - dots / (qn * cn)
    if topk is None:
        return best_idx[:, 0], distances[:, 0]
    return best_idx, distances


def nearest_index(query, candidates, metric: str = DEFAULT_METRIC) -> int:
    """Index of the candidate row nearest to one query vector."""
    query = np.asarray(query)
    idx, _ = pairwise_scores_blocked(query[None, :], candidates, metric)
    return int(idx[0])


def similarity_error_matrix(
    embeddings: dict,
    metric: str = DEFAULT_METRIC,
    block_size: int = DEFAULT_BLOCK,
) -> ErrorMatrix:
    """Fraction of misaligned nearest neighbors per ordered pair.

    embeddings: language -> EmbeddingMatrix, row i of every language
    being the same sentence. E[p][q] counts queries from p whose
    nearest neighbor in q is not row i.
    """
    langs = tuple(embeddings)
    if len(langs) < 2:
        raise ValueError("need at least two languages")
    mats = {lang: _as_matrix(embeddings[lang]) for lang in langs}
    shapes = {(m.rows, m.dim) for m in mats.values()}
    if len(shapes) != 1:
        raise ValueError(f"embedding matrices disagree in shape: {sorted(shapes)}")
    S = mats[langs[0]].rows
    expected = np.arange(S)
    errors = np.full((len(langs), len(langs)), np.nan)
    for i, p in enumerate(langs):
        for j, q in enumerate(langs):
            if p == q:
                continue
            idx, _ = pairwise_scores_blocked(mats[p], mats[q], metric, block_size)
            errors[i, j] = float((idx != expected).mean())
    return ErrorMatrix(langs, errors)


def average_error(matrix: ErrorMatrix, subset=None) -> float:
    """Mean error over all ordered pairs p != q within subset."""
    langs = matrix.languages if subset is None else tuple(subset)
    unknown = [lang for lang in langs if lang not in matrix.languages]
    if unknown:
        raise ValueError(f"languages {unknown} not in the error matrix")
    if len(langs) < 2:
        raise ValueError("need at least two languages to average")
    total = 0.0
    count = 0
    for p in langs:
        for q in langs:
            if p == q:
                continue
            total += matrix.get(p, q)
            count += 1
    return total / count


def topk_query(query, candidates, k: int, metric: str = DEFAULT_METRIC):
    """The k nearest candidates as (index, similarity) pairs.

    Similarity is 1 - distance for cosine (1.0 = perfect match), the
    inner product for inner_product, and the negated l2 distance, so
    the list is always sorted by descending similarity.
    """
    query = np.asarray(query)
    idx, scores = pairwise_scores_blocked(query[None, :], candidates, metric, topk=k)
    return [(int(i), float(1.0 - s) if canon_metric(metric) == "cosine" else float(-s))
            for i, s in zip(idx[0], scores[0])]


def save_embeddings(path, matrix: EmbeddingMatrix):
    """Write an embedding matrix: magic, u64 S, u64 d, f32 rows."""
    data = np.ascontiguousarray(matrix.data, dtype="<f4")
    with open(path, "wb") as f:
        f.write(EMB_MAGIC)
        f.write(struct.pack("<QQ", data.shape[0], data.shape[1]))
        f.write(data.tobytes(order="C"))


def load_embeddings(path, language: str = "") -> EmbeddingMatrix:
    with open(path, "rb") as f:
        if f.read(4) != EMB_MAGIC:
            raise ValueError(f"{path}: not an embedding matrix file")
        header = f.read(16)
        if len(header) != 16:
            raise ValueError(f"{path}: truncated header")
        S, d = struct.unpack("<QQ", header)
        data = f.read(4 * S * d)
        if len(data) != 4 * S * d:
            raise ValueError(f"{path}: truncated data ({S}x{d} expected)")
    arr = np.frombuffer(data, dtype="<f4").reshape(S, d).copy()
    return EmbeddingMatrix(language, arr)
