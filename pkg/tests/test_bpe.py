"""Merge learning, application, inversion, and the model file format."""

import pytest
from hypothesis import given, settings, strategies as st

from mlse import bpe, corpus
from mlse.bpe import BpeError, MARKER


class TestLearnMerges:
    def test_first_merge_by_hand(self):
        # "ab ab ab aab": word "ab" -> (a, b</w>) three times, "aab"
        # adds (a, a) once and (a, b</w>) once, so (a, b</w>) wins 4:1.
        model = bpe.learn_merges(["ab ab ab aab"], 1)
        assert model.merges == [("a", "b" + MARKER)]

    def test_zero_merges_gives_character_vocab(self):
        model = bpe.learn_merges(["ab ba"], 0)
        assert model.merges == []
        segmented = bpe.apply_merges("ab", model)
        assert segmented.pieces == ["a", "b" + MARKER]

    def test_single_character_word_has_no_merges(self):
        model = bpe.learn_merges(["a a a a"], 10)
        assert model.merges == []

    def test_stops_below_two_occurrences(self):
        # Every pair in the corpus is unique, so nothing merges.
        model = bpe.learn_merges(["abc"], 10)
        assert model.merges == []

    def test_lexicographic_tie_break(self):
        # "ba" and "ab" each occur twice: pairs (a, b</w>) and
        # (b, a</w>) both count 2; the lexicographically smaller wins.
        model = bpe.learn_merges(["ab ab ba ba"], 1)
        assert model.merges == [("a", "b" + MARKER)]

    def test_deterministic(self):
        texts = corpus.gen_synthetic(seed=2, n_languages=2, n_rows=50,
                                     vocab_size=40, swap_prob=0.1).texts["f1"]
        a = bpe.learn_merges(texts, 30)
        b = bpe.learn_merges(texts, 30)
        assert a.merges == b.merges and a.vocab == b.vocab

    def test_empty_corpus(self):
        with pytest.raises(BpeError, match="empty"):
            bpe.learn_merges(["", "   "], 5)

    def test_vocab_covers_characters_and_merges(self):
        model = bpe.learn_merges(["ab ab ab aab"], 1)
        for piece in ("a", "b" + MARKER, "ab" + MARKER):
            assert piece in model.vocab


class TestApplyMerges:
    def test_partial_merge_by_hand(self):
        model = bpe.learn_merges(["ab ab ab aab"], 1)
        assert bpe.apply_merges("aab", model).pieces == ["a", "ab" + MARKER]

    def test_full_word_merge(self):
        model = bpe.learn_merges(["ab ab ab aab"], 1)
        assert bpe.apply_merges("ab", model).pieces == ["ab" + MARKER]

    def test_unknown_character_maps_to_unk(self):
        model = bpe.learn_merges(["ab ab"], 1)
        segmented = bpe.apply_merges("aq", model)
        assert segmented.tokens[-1] in (bpe.UNK_ID, bpe.UNK_FINAL_ID)

    def test_token_count_at_least_word_count(self):
        texts = corpus.gen_synthetic(seed=8, n_languages=2, n_rows=100,
                                     vocab_size=80, swap_prob=0.2).texts["f1"]
        model = bpe.learn_merges(texts, 60)
        for t in texts:
            assert len(bpe.apply_merges(t, model)) >= len(t.split())

    def test_monotone_in_num_merges(self):
        texts = corpus.gen_synthetic(seed=9, n_languages=2, n_rows=80,
                                     vocab_size=50, swap_prob=0.0).texts["f1"]
        sentence = texts[0]
        counts = [
            len(bpe.apply_merges(sentence, bpe.learn_merges(texts, n)))
            for n in (0, 5, 20, 80)
        ]
        assert counts == sorted(counts, reverse=True)

    def test_uppercase_input_lowercased(self):
        model = bpe.learn_merges(["ab ab"], 1)
        assert bpe.apply_merges("AB", model).pieces == ["ab" + MARKER]


class TestRestoreText:
    def test_inverse_of_worked_example(self):
        model = bpe.learn_merges(["ab ab ab aab"], 1)
        assert bpe.restore_text(bpe.apply_merges("aab", model), model) == "aab"

    def test_empty_tokens(self):
        model = bpe.learn_merges(["ab"], 0)
        assert bpe.restore_text([], model) == ""

    def test_unclosed_word_rejected(self):
        model = bpe.learn_merges(["ab"], 0)
        non_final = model.vocab["a"]
        with pytest.raises(BpeError, match="marker"):
            bpe.restore_text([non_final], model)

    def test_round_trip_synthetic(self):
        texts = corpus.gen_synthetic(seed=12, n_languages=2, n_rows=1000,
                                     vocab_size=120, swap_prob=0.2).texts["f1"]
        model = bpe.learn_merges(texts, 100)
        for t in texts:
            assert bpe.restore_text(bpe.apply_merges(t, model), model) == t

    @settings(max_examples=200, deadline=None)
    @given(
        st.lists(
            st.text(alphabet="abcd", min_size=1, max_size=8),
            min_size=1,
            max_size=8,
        )
    )
    def test_round_trip_property(self, words):
        text = " ".join(words)
        model = bpe.learn_merges([text, "abcd dcba"], 12)
        assert bpe.restore_text(bpe.apply_merges(text, model), model) == text


class TestModelFile:
    def test_save_load_round_trip(self, tmp_path):
        texts = corpus.gen_synthetic(seed=6, n_languages=2, n_rows=60,
                                     vocab_size=40, swap_prob=0.1).texts["f1"]
        model = bpe.learn_merges(texts, 25)
        path = tmp_path / "model.bpe"
        bpe.save_model(model, path)
        loaded = bpe.load_model(path)
        assert loaded.merges == model.merges
        assert loaded.vocab == model.vocab

    def test_header_line(self, tmp_path):
        model = bpe.learn_merges(["ab ab"], 1)
        path = tmp_path / "model.bpe"
        bpe.save_model(model, path)
        assert path.read_text().splitlines()[0] == "bpe v1 1"

    def test_reject_foreign_file(self, tmp_path):
        path = tmp_path / "bad.bpe"
        path.write_text("not a model\n")
        with pytest.raises(BpeError, match="not a bpe"):
            bpe.load_model(path)

    def test_reject_truncated(self, tmp_path):
        path = tmp_path / "bad.bpe"
        path.write_text("bpe v1 3\na b\n")
        with pytest.raises(BpeError, match="truncated"):
            bpe.load_model(path)
