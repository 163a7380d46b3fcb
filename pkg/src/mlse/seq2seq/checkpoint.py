"""Binary model checkpoints.

Layout: magic "MLSE", u32 format version, u64 length + UTF-8 JSON
configuration block, then for each tensor (sorted by name): u16 name
length, name bytes, u8 rank, u64 dims, float32 little-endian row-major
data. Everything little-endian; no timestamps, so identical models
serialize byte-identically.
"""
from __future__ import annotations

import dataclasses
import json
import struct

import numpy as np

from ..nn import EncoderConfig
from .model import DecoderConfig, ModelParams

MAGIC = b"MLSE"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, model: ModelParams):
    config = {
        "languages": list(model.languages),
        "enc_config": dataclasses.asdict(model.enc_config),
        "dec_config": dataclasses.asdict(model.dec_config),
        "vocab_sizes": {lang: model.vocab_sizes[lang] for lang in model.languages},
        "seed": model.seed,
    }
    blob = json.dumps(config, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        f.write(struct.pack("<Q", len(blob)))
        f.write(blob)
        for name in sorted(model.params):
            arr = np.ascontiguousarray(model.params[name], dtype="<f4")
            name_b = name.encode("utf-8")
            f.write(struct.pack("<H", len(name_b)))
            f.write(name_b)
            f.write(struct.pack("<B", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            f.write(arr.tobytes(order="C"))


def _read_exact(f, n: int, what: str) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise CheckpointError(f"truncated checkpoint while reading {what}")
    return data


def load_checkpoint(path) -> ModelParams:
    with open(path, "rb") as f:
        if f.read(4) != MAGIC:
            raise CheckpointError(f"{path}: not a model checkpoint")
        (version,) = struct.unpack("<I", _read_exact(f, 4, "version"))
        if version != VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        (blob_len,) = struct.unpack("<Q", _read_exact(f, 8, "config length"))
        config = json.loads(_read_exact(f, blob_len, "config").decode("utf-8"))
        params = {}
        while True:
            head = f.read(2)
            if not head:
                break
            if len(head) != 2:
                raise CheckpointError("truncated checkpoint at tensor header")
            (name_len,) = struct.unpack("<H", head)
            name = _read_exact(f, name_len, "tensor name").decode("utf-8")
            (ndim,) = struct.unpack("<B", _read_exact(f, 1, "tensor rank"))
            shape = struct.unpack(f"<{ndim}Q", _read_exact(f, 8 * ndim, "tensor shape"))
            count = int(np.prod(shape, dtype=np.int64)) if ndim else 1
            data = _read_exact(f, 4 * count, f"tensor {name!r}")
            params[name] = np.frombuffer(data, dtype="<f4").reshape(shape).copy()
    try:
        model = ModelParams(
            languages=tuple(config["languages"]),
            enc_config=EncoderConfig(**config["enc_config"]),
            dec_config=DecoderConfig(**config["dec_config"]),
            vocab_sizes=dict(config["vocab_sizes"]),
            seed=int(config["seed"]),
            params=params,
        )
    except (KeyError, TypeError) as exc:
        raise CheckpointError(f"malformed checkpoint config: {exc}") from exc
    return model
