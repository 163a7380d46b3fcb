"""Parallel-corpus loading, filtering, splitting, and synthesis."""

import pytest

from mlse import corpus
from mlse.corpus import CorpusError, ParallelCorpus


def _write(tmp_path, name, lines):
    p = tmp_path / name
    p.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return p


class TestLoadParallel:
    def test_two_three_line_files(self, tmp_path):
        paths = {
            "en": _write(tmp_path, "c.en", ["a b", "c d", "e"]),
            "fr": _write(tmp_path, "c.fr", ["x", "y z", "w"]),
        }
        c = corpus.load_parallel(paths)
        assert c.languages == ("en", "fr")
        assert c.size == 3

    def test_line_count_mismatch(self, tmp_path):
        paths = {
            "en": _write(tmp_path, "c.en", ["a", "b", "c"]),
            "fr": _write(tmp_path, "c.fr", ["x", "y", "z", "w"]),
        }
        with pytest.raises(CorpusError, match="line counts differ"):
            corpus.load_parallel(paths)

    def test_lowercasing(self, tmp_path):
        c = corpus.load_parallel({"en": _write(tmp_path, "c.en", ["Hello World"])})
        assert c.texts["en"] == ["hello world"]

    def test_empty_file(self, tmp_path):
        p = tmp_path / "c.en"
        p.write_text("", encoding="utf-8")
        with pytest.raises(CorpusError, match="empty"):
            corpus.load_parallel({"en": p})

    def test_invalid_utf8(self, tmp_path):
        p = tmp_path / "c.en"
        p.write_bytes(b"\xff\xfe\x00bad")
        with pytest.raises(CorpusError, match="UTF-8"):
            corpus.load_parallel({"en": p})


class TestWriteCorpus:
    def test_round_trip(self, tmp_path):
        c = ParallelCorpus(("f1", "f2"), {"f1": ["a b", "c"], "f2": ["x", "y z"]})
        corpus.write_corpus(c, tmp_path / "out")
        back = corpus.load_parallel(
            {"f1": tmp_path / "out.f1", "f2": tmp_path / "out.f2"}
        )
        assert back.texts == c.texts

    def test_metadata_sidecar(self, tmp_path):
        c = ParallelCorpus(("f1",), {"f1": ["a"]})
        corpus.write_corpus(c, tmp_path / "out", metadata={"seed": 3, "S": 1})
        meta = (tmp_path / "out.meta").read_text()
        assert "seed=3" in meta and "S=1" in meta


class TestFilterCorpus:
    def test_length_rule(self):
        texts = {"en": ["a b c", "x " * 60, "d e f g h"]}
        c = ParallelCorpus(("en",), texts)
        kept = corpus.filter_corpus(c, max_len=50)
        assert kept.texts["en"] == [texts["en"][0], texts["en"][2]]

    def test_duplicate_rule(self):
        c = ParallelCorpus(("en",), {"en": ["a b", "a b", "c"]})
        kept = corpus.filter_corpus(c)
        assert kept.texts["en"] == ["a b", "c"]

    def test_duplicate_in_any_language_drops_row(self):
        c = ParallelCorpus(
            ("f1", "f2"), {"f1": ["a", "b", "c"], "f2": ["x", "x", "z"]}
        )
        kept = corpus.filter_corpus(c)
        assert kept.texts["f1"] == ["a", "c"]

    def test_all_rows_too_long(self):
        c = ParallelCorpus(("en",), {"en": ["a b c d"]})
        with pytest.raises(CorpusError, match="every row"):
            corpus.filter_corpus(c, max_len=2)

    def test_idempotent(self):
        c = corpus.gen_synthetic(seed=5, n_languages=2, n_rows=50,
                                 vocab_size=30, swap_prob=0.2)
        once = corpus.filter_corpus(c)
        twice = corpus.filter_corpus(once)
        assert once.texts == twice.texts


class TestSplitDev:
    def test_partition(self):
        c = ParallelCorpus(("en",), {"en": [f"s {i}" for i in range(10)]})
        train, dev = corpus.split_dev(c, 2, seed=0)
        assert train.size == 8 and dev.size == 2
        assert set(train.texts["en"]) | set(dev.texts["en"]) == set(c.texts["en"])
        assert not set(train.texts["en"]) & set(dev.texts["en"])

    def test_empty_dev(self):
        c = ParallelCorpus(("en",), {"en": ["a", "b"]})
        train, dev = corpus.split_dev(c, 0, seed=0)
        assert train.texts == c.texts and dev.size == 0

    def test_deterministic(self):
        c = ParallelCorpus(("en",), {"en": [f"s {i}" for i in range(20)]})
        a = corpus.split_dev(c, 5, seed=9)
        b = corpus.split_dev(c, 5, seed=9)
        assert a[1].texts == b[1].texts

    def test_dev_size_too_large(self):
        c = ParallelCorpus(("en",), {"en": ["a", "b"]})
        with pytest.raises(CorpusError):
            corpus.split_dev(c, 2, seed=0)


class TestGenSynthetic:
    def test_deterministic(self):
        a = corpus.gen_synthetic(seed=1, n_languages=3, n_rows=5,
                                 vocab_size=50, swap_prob=0.0)
        b = corpus.gen_synthetic(seed=1, n_languages=3, n_rows=5,
                                 vocab_size=50, swap_prob=0.0)
        assert a.texts == b.texts

    def test_seed_changes_output(self):
        a = corpus.gen_synthetic(seed=1, n_languages=2, n_rows=5,
                                 vocab_size=50, swap_prob=0.0)
        b = corpus.gen_synthetic(seed=2, n_languages=2, n_rows=5,
                                 vocab_size=50, swap_prob=0.0)
        assert a.texts != b.texts

    def test_shape_and_lengths(self):
        c = corpus.gen_synthetic(seed=4, n_languages=4, n_rows=40,
                                 vocab_size=60, swap_prob=0.3)
        assert c.languages == ("f1", "f2", "f3", "f4")
        assert c.size == 40
        for lang in c.languages:
            for line in c.texts[lang]:
                assert 4 <= len(line.split()) <= 20

    def test_zero_swap_is_rowwise_bijection(self):
        # With no swaps, languages differ only by a fixed word
        # substitution; position j of every row must map consistently.
        c = corpus.gen_synthetic(seed=7, n_languages=2, n_rows=60,
                                 vocab_size=40, swap_prob=0.0)
        mapping: dict = {}
        for a, b in zip(c.texts["f1"], c.texts["f2"]):
            wa, wb = a.split(), b.split()
            assert len(wa) == len(wb)
            for x, y in zip(wa, wb):
                assert mapping.setdefault(x, y) == y
        assert len(set(mapping.values())) == len(mapping)

    def test_language_zero_is_identity_substitution(self):
        # f1 renders the latent meaning ids directly, so two corpora that
        # differ only in swap_prob share the same sorted f1 word bags.
        a = corpus.gen_synthetic(seed=3, n_languages=2, n_rows=10,
                                 vocab_size=30, swap_prob=0.0)
        b = corpus.gen_synthetic(seed=3, n_languages=2, n_rows=10,
                                 vocab_size=30, swap_prob=0.9)
        for x, y in zip(a.texts["f1"], b.texts["f1"]):
            assert sorted(x.split()) == sorted(y.split())

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(n_languages=1, n_rows=5, vocab_size=50, swap_prob=0.0),
            dict(n_languages=2, n_rows=0, vocab_size=50, swap_prob=0.0),
            dict(n_languages=2, n_rows=5, vocab_size=5, swap_prob=0.0),
            dict(n_languages=2, n_rows=5, vocab_size=50, swap_prob=1.5),
        ],
    )
    def test_invalid_params(self, kwargs):
        with pytest.raises(CorpusError):
            corpus.gen_synthetic(seed=1, **kwargs)


class TestParallelCorpus:
    def test_unaligned_sizes_rejected(self):
        with pytest.raises(CorpusError):
            ParallelCorpus(("a", "b"), {"a": ["x"], "b": ["y", "z"]})

    def test_duplicate_language_rejected(self):
        with pytest.raises(CorpusError):
            ParallelCorpus(("a", "a"), {"a": ["x"]})

    def test_select_preserves_alignment(self):
        c = ParallelCorpus(("a", "b"), {"a": ["0", "1", "2"], "b": ["x", "y", "z"]})
        s = c.select([2, 0])
        assert s.texts == {"a": ["2", "0"], "b": ["z", "x"]}
