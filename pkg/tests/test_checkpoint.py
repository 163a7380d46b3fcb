"""Binary checkpoint round-trips and failure modes."""

import numpy as np
import pytest

from mlse.nn import EncoderConfig
from mlse.seq2seq import (
    CheckpointError,
    DecoderConfig,
    init_model,
    load_checkpoint,
    save_checkpoint,
)

LANGS = ("f1", "f2")


def _model(seed=0, variant="bidirectional-maxpool"):
    return init_model(
        LANGS,
        EncoderConfig(variant=variant, depth=2, nhid=5, emb_dim=4),
        DecoderConfig(depth=1, nhid=5),
        {"f1": 11, "f2": 9},
        seed=seed,
    )


class TestRoundTrip:
    def test_parameters_restored_exactly(self, tmp_path):
        model = _model(seed=7)
        path = tmp_path / "model.bin"
        save_checkpoint(path, model)
        loaded = load_checkpoint(path)
        assert loaded.params.keys() == model.params.keys()
        for name in model.params:
            np.testing.assert_array_equal(loaded.params[name], model.params[name])

    def test_config_restored(self, tmp_path):
        model = _model(seed=7, variant="stacked-last-state")
        path = tmp_path / "model.bin"
        save_checkpoint(path, model)
        loaded = load_checkpoint(path)
        assert loaded.languages == model.languages
        assert loaded.enc_config == model.enc_config
        assert loaded.dec_config == model.dec_config
        assert loaded.vocab_sizes == model.vocab_sizes
        assert loaded.seed == model.seed

    def test_save_is_deterministic(self, tmp_path):
        model = _model(seed=3)
        a = tmp_path / "a.bin"
        b = tmp_path / "b.bin"
        save_checkpoint(a, model)
        save_checkpoint(b, model)
        assert a.read_bytes() == b.read_bytes()

    def test_distinct_models_differ_on_disk(self, tmp_path):
        a = tmp_path / "a.bin"
        b = tmp_path / "b.bin"
        save_checkpoint(a, _model(seed=1))
        save_checkpoint(b, _model(seed=2))
        assert a.read_bytes() != b.read_bytes()

    def test_reload_of_reload_is_identical(self, tmp_path):
        first = tmp_path / "a.bin"
        second = tmp_path / "b.bin"
        save_checkpoint(first, _model(seed=5))
        save_checkpoint(second, load_checkpoint(first))
        assert first.read_bytes() == second.read_bytes()


class TestRejection:
    def test_wrong_magic(self, tmp_path):
        path = tmp_path / "bogus.bin"
        path.write_bytes(b"NOPE" + b"\x00" * 64)
        with pytest.raises(CheckpointError, match="not a model checkpoint"):
            load_checkpoint(path)

    def test_unsupported_version(self, tmp_path):
        model = _model()
        path = tmp_path / "model.bin"
        save_checkpoint(path, model)
        data = bytearray(path.read_bytes())
        data[4] = 99  # little-endian u32 version field
        path.write_bytes(bytes(data))
        with pytest.raises(CheckpointError, match="version"):
            load_checkpoint(path)

    @pytest.mark.parametrize("keep", [4, 8, 20, 200])
    def test_truncation_detected(self, tmp_path, keep):
        model = _model()
        path = tmp_path / "model.bin"
        save_checkpoint(path, model)
        full = path.read_bytes()
        assert keep < len(full)
        path.write_bytes(full[:keep])
        with pytest.raises(CheckpointError, match="truncated"):
            load_checkpoint(path)

    def test_tensor_payload_truncated(self, tmp_path):
        model = _model()
        path = tmp_path / "model.bin"
        save_checkpoint(path, model)
        full = path.read_bytes()
        path.write_bytes(full[:-3])
        with pytest.raises(CheckpointError, match="truncated"):
            load_checkpoint(path)

    def test_error_is_value_error(self):
        assert issubclass(CheckpointError, ValueError)
