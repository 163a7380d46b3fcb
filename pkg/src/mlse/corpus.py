"""N-way parallel corpora: loading, validation, filtering, synthesis.

Alignment is by line index: line i of every language file is a mutual
translation. All downstream code (training paths, similarity search)
relies on this contract.
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class CorpusError(ValueError):
    """Contract violation in corpus construction or filtering."""


@dataclass
class Sentence:
    """A tokenized sentence: subword ids plus the text they came from."""

    tokens: list[int]
    pieces: list[str]
    original_text: str

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class ParallelCorpus:
    """S sentences aligned across L languages, stored as lowercased text."""

    languages: tuple[str, ...]
    texts: dict[str, list[str]] = field(repr=False)

    def __post_init__(self):
        if not self.languages:
            raise CorpusError("corpus needs at least one language")
        if len(set(self.languages)) != len(self.languages):
            raise CorpusError("duplicate language codes")
        sizes = {lang: len(self.texts[lang]) for lang in self.languages}
        if len(set(sizes.values())) > 1:
            raise CorpusError(f"per-language sentence counts differ: {sizes}")

    @property
    def size(self) -> int:
        return len(self.texts[self.languages[0]])

    def row(self, i: int) -> dict[str, str]:
        return {lang: self.texts[lang][i] for lang in self.languages}

    def select(self, indices) -> "ParallelCorpus":
        """New corpus keeping the given rows, in the given order."""
        return ParallelCorpus(
            self.languages,
            {lang: [self.texts[lang][i] for i in indices] for lang in self.languages},
        )


def load_parallel(paths: dict[str, str | Path]) -> ParallelCorpus:
    """Load one file per language (UTF-8, one sentence per line).

    All files must have the same line count; text is lowercased on load.
    """
    texts: dict[str, list[str]] = {}
    for lang, path in paths.items():
        path = Path(path)
        try:
            raw = path.read_text(encoding="utf-8")
        except UnicodeDecodeError as e:
            raise CorpusError(f"{path}: not valid UTF-8 ({e})") from e
        lines = raw.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        if not lines:
            raise CorpusError(f"{path}: empty corpus file")
        texts[lang] = [line.lower() for line in lines]

    counts = {lang: len(lines) for lang, lines in texts.items()}
    if len(set(counts.values())) > 1:
        raise CorpusError(f"line counts differ between languages: {counts}")
    return ParallelCorpus(tuple(paths.keys()), texts)


def write_corpus(corpus: ParallelCorpus, stem: str | Path,
                 metadata: dict | None = None) -> list[Path]:
    """Write one `<stem>.<lang>` file per language (LF endings).

    When `metadata` is given, a `<stem>.meta` sidecar with key=value lines
    is written alongside.
    """
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    written = []
    for lang in corpus.languages:
        path = stem.with_name(f"{stem.name}.{lang}")
        path.write_text("\n".join(corpus.texts[lang]) + "\n", encoding="utf-8")
        written.append(path)
    if metadata is not None:
        side = stem.with_name(f"{stem.name}.meta")
        side.write_text(
            "".join(f"{k}={v}\n" for k, v in metadata.items()), encoding="utf-8"
        )
        written.append(side)
    return written


def word_count(text: str) -> int:
    return len(text.split())


def filter_corpus(corpus: ParallelCorpus, max_len: int = 50) -> ParallelCorpus:
    """Drop rows that are over-long or duplicate an earlier retained row.

    A row goes if any language's sentence has more than `max_len`
    whitespace words (counted before subword encoding), is empty, or is
    byte-identical to a retained earlier sentence of the same language.
    """
    if max_len < 1:
        raise CorpusError("max_len must be >= 1")
    seen: dict[str, set[str]] = {lang: set() for lang in corpus.languages}
    kept: list[int] = []
    for i in range(corpus.size):
        row = corpus.row(i)
        if any(not 1 <= word_count(t) <= max_len for t in row.values()):
            continue
        if any(row[lang] in seen[lang] for lang in corpus.languages):
            continue
        for lang in corpus.languages:
            seen[lang].add(row[lang])
        kept.append(i)
    if not kept:
        raise CorpusError("filtering removed every row")
    return corpus.select(kept)


def split_dev(corpus: ParallelCorpus, dev_size: int,
              seed: int) -> tuple[ParallelCorpus, ParallelCorpus]:
    """Deterministic disjoint row partition into (train, dev)."""
    if not 0 <= dev_size < corpus.size:
        raise CorpusError(
            f"dev_size must be in [0, {corpus.size}), got {dev_size}"
        )
    rng = np.random.default_rng([seed, 0x5E17])
    perm = rng.permutation(corpus.size)
    dev_idx = sorted(perm[:dev_size].tolist())
    dev_set = set(dev_idx)
    train_idx = [i for i in range(corpus.size) if i not in dev_set]
    return corpus.select(train_idx), corpus.select(dev_idx)


# Synthetic languages: each language renders the same latent "meaning"
# sequence through its own bijective token substitution, then perturbs
# local order with seeded adjacent swaps. Shared semantics per row,
# distinct surface vocab usage and mildly different word order.

_MIN_MEANING_LEN = 4
_MAX_MEANING_LEN = 20


def _render_word(token_id: int) -> str:
    # Base-26 letter rendering, at least two letters, so subword merges
    # have something to learn.
    letters = string.ascii_lowercase
    out = [letters[token_id % 26]]
    token_id //= 26
    while token_id:
        out.append(letters[token_id % 26])
        token_id //= 26
    if len(out) == 1:
        out.append("a")
    return "".join(reversed(out))


def gen_synthetic(seed: int, n_languages: int, n_rows: int, vocab_size: int,
                  swap_prob: float) -> ParallelCorpus:
    """Deterministic desk-scale N-way parallel corpus."""
    if n_languages < 2:
        raise CorpusError("need at least 2 languages")
    if n_rows < 1:
        raise CorpusError("need at least 1 row")
    if vocab_size < 10:
        raise CorpusError("vocab_size must be >= 10")
    if not 0.0 <= swap_prob <= 1.0:
        raise CorpusError("swap_prob must be a probability")

    meaning_rng = np.random.default_rng([seed, 1])
    meanings: list[np.ndarray] = []
    used: set[tuple[int, ...]] = set()
    attempts = 0
    while len(meanings) < n_rows:
        attempts += 1
        if attempts > 100 * n_rows:
            raise CorpusError("could not draw enough distinct meanings")
        length = int(meaning_rng.integers(_MIN_MEANING_LEN, _MAX_MEANING_LEN + 1))
        seq = meaning_rng.integers(0, vocab_size, size=length)
        key = tuple(seq.tolist())
        if key in used:
            continue
        used.add(key)
        meanings.append(seq)

    languages = tuple(f"f{p + 1}" for p in range(n_languages))
    texts: dict[str, list[str]] = {}
    for p, lang in enumerate(languages):
        if p == 0:
            subst = np.arange(vocab_size)
        else:
            subst = np.random.default_rng([seed, 2, p]).permutation(vocab_size)
        swap_rng = np.random.default_rng([seed, 3, p])
        lines = []
        for seq in meanings:
            tokens = subst[seq].tolist()
            for j in range(len(tokens) - 1):
                if swap_prob > 0.0 and swap_rng.random() < swap_prob:
                    tokens[j], tokens[j + 1] = tokens[j + 1], tokens[j]
            lines.append(" ".join(_render_word(t) for t in tokens))
        texts[lang] = lines
    return ParallelCorpus(languages, texts)
