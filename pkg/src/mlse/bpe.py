"""Byte-pair encoding: greedy merge learning, application, inversion.

Words are whitespace-delimited. Before learning or applying merges, the
end-of-word marker is appended to each word's final character, so a
subword carrying the marker always closes a word and detokenization is
unambiguous.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import Sentence

MARKER = "</w>"
UNK_PIECE = "<unk>"
UNK_ID = 0
UNK_FINAL_ID = 1


class BpeError(ValueError):
    pass


@dataclass
class BpeModel:
    """Ordered merge list plus the derived subword vocabulary."""

    merges: list[tuple[str, str]]
    vocab: dict[str, int]
    marker: str = MARKER
    _ranks: dict[tuple[str, str], int] = field(default=None, repr=False)
    _pieces_by_id: list[str] = field(default=None, repr=False)
    _word_cache: dict[str, tuple[str, ...]] = field(default=None, repr=False)

    def __post_init__(self):
        if self._ranks is None:
            self._ranks = {pair: r for r, pair in enumerate(self.merges)}
        if self._pieces_by_id is None:
            self._pieces_by_id = [""] * (max(self.vocab.values()) + 1)
            for piece, idx in self.vocab.items():
                self._pieces_by_id[idx] = piece
        if self._word_cache is None:
            self._word_cache = {}

    @property
    def vocab_size(self) -> int:
        return len(self._pieces_by_id)

    def piece(self, token_id: int) -> str:
        return self._pieces_by_id[token_id]


def _word_symbols(word: str) -> tuple[str, ...]:
    # "abc" -> ("a", "b", "c</w>")
    chars = list(word)
    chars[-1] += MARKER
    return tuple(chars)


def _count_pairs(seq) -> Counter:
    return Counter(zip(seq, seq[1:]))


def _merge_seq(seq: tuple[str, ...], pair: tuple[str, str]) -> tuple[str, ...]:
    left, right = pair
    joined = left + right
    out = []
    i = 0
    while i < len(seq):
        if i + 1 < len(seq) and seq[i] == left and seq[i + 1] == right:
            out.append(joined)
            i += 2
        else:
            out.append(seq[i])
            i += 1
    return tuple(out)


def _build_vocab(alphabet: set[str], merges: list[tuple[str, str]]) -> dict[str, int]:
    vocab = {UNK_PIECE: UNK_ID, UNK_PIECE + MARKER: UNK_FINAL_ID}
    for sym in sorted(alphabet):
        vocab.setdefault(sym, len(vocab))
    for left, right in merges:
        vocab.setdefault(left + right, len(vocab))
    return vocab


def learn_merges(corpus_texts, num_merges: int) -> BpeModel:
    """Greedy frequency-based merge learning over a text corpus.

    Repeatedly merges the most frequent adjacent symbol pair inside
    words; stops after `num_merges` merges or once no pair occurs at
    least twice. Equally frequent pairs break ties lexicographically.
    """
    if num_merges < 0:
        raise BpeError("num_merges must be >= 0")
    word_freq = Counter()
    for text in corpus_texts:
        word_freq.update(text.lower().split())
    if not word_freq:
        raise BpeError("empty corpus: no words to learn from")

    words = {w: _word_symbols(w) for w in word_freq}
    alphabet = {sym for seq in words.values() for sym in seq}

    pair_counts: Counter = Counter()
    pair_words: dict[tuple[str, str], set[str]] = {}
    for w, seq in words.items():
        f = word_freq[w]
        for pair, n in _count_pairs(seq).items():
            pair_counts[pair] += n * f
            pair_words.setdefault(pair, set()).add(w)

    merges: list[tuple[str, str]] = []
    while len(merges) < num_merges and pair_counts:
        best_count = max(pair_counts.values())
        if best_count < 2:
            break
        best = min(p for p, c in pair_counts.items() if c == best_count)
        merges.append(best)
        for w in sorted(pair_words.get(best, ())):
            old = words[w]
            new = _merge_seq(old, best)
            f = word_freq[w]
            for pair, n in _count_pairs(old).items():
                pair_counts[pair] -= n * f
                if pair_counts[pair] <= 0:
                    del pair_counts[pair]
                pair_words[pair].discard(w)
            for pair, n in _count_pairs(new).items():
                pair_counts[pair] += n * f
                pair_words.setdefault(pair, set()).add(w)
            words[w] = new

    return BpeModel(merges, _build_vocab(alphabet, merges))


def _encode_word(word: str, model: BpeModel) -> tuple[str, ...]:
    cached = model._word_cache.get(word)
    if cached is not None:
        return cached
    seq = _word_symbols(word)
    ranks = model._ranks
    # Replay merges in learned order without scanning the whole table:
    # repeatedly fuse the lowest-ranked pair present, never revisiting
    # ranks at or below one already applied.
    applied = -1
    while len(seq) > 1:
        best_rank = None
        best_pair = None
        for pair in zip(seq, seq[1:]):
            r = ranks.get(pair)
            if r is not None and r > applied and (best_rank is None or r < best_rank):
                best_rank = r
                best_pair = pair
        if best_pair is None:
            break
        seq = _merge_seq(seq, best_pair)
        applied = best_rank
    model._word_cache[word] = seq
    return seq


def apply_merges(sentence_text: str, model: BpeModel) -> Sentence:
    """Lowercase, split to characters per word, replay merges in order.

    Symbols absent from the vocabulary (characters unseen at learn time)
    fall back to the reserved UNK ids instead of failing.
    """
    text = sentence_text.lower()
    tokens: list[int] = []
    pieces: list[str] = []
    for word in text.split():
        for sym in _encode_word(word, model):
            idx = model.vocab.get(sym)
            if idx is None:
                final = sym.endswith(MARKER)
                idx = UNK_FINAL_ID if final else UNK_ID
                sym = UNK_PIECE + MARKER if final else UNK_PIECE
            tokens.append(idx)
            pieces.append(sym)
    return Sentence(tokens=tokens, pieces=pieces, original_text=sentence_text)


def restore_text(tokens, model: BpeModel) -> str:
    """Exact inverse of apply_merges for in-vocabulary text."""
    if isinstance(tokens, Sentence):
        tokens = tokens.tokens
    words: list[str] = []
    current: list[str] = []
    for idx in tokens:
        if not 0 <= idx < model.vocab_size:
            raise BpeError(f"token id {idx} out of range")
        piece = model.piece(idx)
        if piece.endswith(MARKER):
            current.append(piece[: -len(MARKER)])
            words.append("".join(current))
            current = []
        else:
            current.append(piece)
    if current:
        raise BpeError("malformed token sequence: word not closed by a marker piece")
    return " ".join(words)


def save_model(model: BpeModel, path: str | Path) -> None:
    """Plain-text model file: header, merge lines, then alphabet lines.

    The alphabet section lists single symbols that never took part in a
    merge; without it the seen-character set could not be rebuilt.
    """
    path = Path(path)
    lines = [f"bpe v1 {len(model.merges)}"]
    lines += [f"{left} {right}" for left, right in model.merges]
    merged_parts = {s for pair in model.merges for s in pair}
    merged_parts |= {left + right for left, right in model.merges}
    reserved = {UNK_PIECE, UNK_PIECE + MARKER}
    lines += sorted(
        sym for sym in model.vocab
        if sym not in merged_parts and sym not in reserved
    )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> BpeModel:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or not lines[0].startswith("bpe v1 "):
        raise BpeError(f"{path}: not a bpe v1 model file")
    try:
        n_merges = int(lines[0].split()[2])
    except (IndexError, ValueError) as e:
        raise BpeError(f"{path}: malformed header {lines[0]!r}") from e
    if len(lines) < 1 + n_merges:
        raise BpeError(f"{path}: truncated merge list")
    merges = []
    for line in lines[1 : 1 + n_merges]:
        parts = line.split(" ")
        if len(parts) != 2:
            raise BpeError(f"{path}: malformed merge line {line!r}")
        merges.append((parts[0], parts[1]))
    alphabet = {s for pair in merges for s in pair if _is_single(s)}
    alphabet |= {s for s in lines[1 + n_merges :] if s}
    return BpeModel(merges, _build_vocab(alphabet, merges))


def _is_single(sym: str) -> bool:
    base = sym[: -len(MARKER)] if sym.endswith(MARKER) else sym
    return len(base) == 1
