"""Run configuration files and reproducibility manifests.

Configs are YAML; every field has a default matching the reference
hyperparameters (batch 96, lr 0.01, clip 2.0, embeddings 384, dropout
0.2, up to 5 epochs), so a file only states deviations.
"""
from __future__ import annotations

import dataclasses
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .nn import EncoderConfig
from .seq2seq import DecoderConfig, PathSchedule, TrainingPath, one_to_rest_schedule


class ConfigError(ValueError):
    pass


SCHEDULE_PRESETS = ("one-to-rest",)


@dataclass
class RunConfig:
    languages: tuple = ()
    corpus_train: dict | None = None  # language -> text file path
    synthetic: dict | None = None  # rows / vocab / swap_prob
    dev_size: int = 500
    max_len: int = 50
    bpe_merges: int = 200
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    decoder: DecoderConfig = field(default_factory=DecoderConfig)
    schedule: object = "one-to-rest"  # preset name or explicit entries
    epochs: int = 5
    batch_size: int = 96
    lr: float = 0.01
    clip: float = 2.0
    lr_min: float = 1e-4
    eval_sim: bool = True
    metric: str = "cosine"
    seed: int = 0

    def __post_init__(self):
        self.languages = tuple(self.languages)
        if len(self.languages) < 2:
            raise ConfigError("config needs at least 2 languages")
        if self.corpus_train is None and self.synthetic is None:
            raise ConfigError("config needs either corpus.train paths or corpus.synthetic")
        if self.corpus_train is not None:
            missing = [lang for lang in self.languages if lang not in self.corpus_train]
            if missing:
                raise ConfigError(f"corpus.train missing languages {missing}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be positive")
        if self.lr <= 0 or self.clip <= 0:
            raise ConfigError("lr and clip must be positive")
        if self.dev_size < 1:
            raise ConfigError("dev_size must be positive")

    def build_schedule(self) -> PathSchedule:
        if self.schedule == "one-to-rest":
            return one_to_rest_schedule(self.languages)
        if isinstance(self.schedule, str):
            raise ConfigError(
                f"unknown schedule preset {self.schedule!r}; options: {SCHEDULE_PRESETS}"
            )
        entries = []
        for entry in self.schedule:
            try:
                path = TrainingPath(
                    entry["sources"],
                    entry["targets"],
                    allow_autoencode=bool(entry.get("allow_autoencode", False)),
                )
                entries.append((path, float(entry["coeff"])))
            except (KeyError, TypeError) as exc:
                raise ConfigError(f"bad schedule entry {entry!r}: {exc}") from exc
        return PathSchedule(entries)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["languages"] = list(self.languages)
        return out


def _take(section: dict, allowed: dict, where: str) -> dict:
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {unknown}")
    return {allowed[k]: v for k, v in section.items()}


def config_from_dict(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    top = dict(raw)
    kwargs: dict = {}
    if "languages" in top:
        kwargs["languages"] = top.pop("languages")
    corpus = top.pop("corpus", {})
    kwargs.update(
        _take(
            corpus,
            {
                "train": "corpus_train",
                "synthetic": "synthetic",
                "dev_size": "dev_size",
                "max_len": "max_len",
            },
            "corpus",
        )
    )
    bpe = top.pop("bpe", {})
    kwargs.update(_take(bpe, {"merges": "bpe_merges"}, "bpe"))
    enc = top.pop("encoder", {})
    enc_fields = {f.name: f.name for f in dataclasses.fields(EncoderConfig)}
    enc_fields["dropout"] = "dropout_p"
    try:
        kwargs["encoder"] = EncoderConfig(**_take(enc, enc_fields, "encoder"))
        dec = top.pop("decoder", {})
        dec_fields = {f.name: f.name for f in dataclasses.fields(DecoderConfig)}
        kwargs["decoder"] = DecoderConfig(**_take(dec, dec_fields, "decoder"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if "schedule" in top:
        kwargs["schedule"] = top.pop("schedule")
    training = top.pop("training", {})
    kwargs.update(
        _take(
            training,
            {k: k for k in ("epochs", "batch_size", "lr", "clip", "lr_min", "eval_sim", "metric")},
            "training",
        )
    )
    if "seed" in top:
        kwargs["seed"] = int(top.pop("seed"))
    if top:
        raise ConfigError(f"unknown top-level config keys: {sorted(top)}")
    return RunConfig(**kwargs)


def load_config(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = yaml.safe_load(f)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if raw is None:
        raise ConfigError(f"{path}: empty config")
    return config_from_dict(raw)


def write_manifest(target, command: str, config: dict | None, seed: int | None, extra: dict | None = None):
    """Record how an artifact was produced (no timestamps, so reruns
    are byte-identical). target: output directory or artifact path."""
    import numpy

    from . import __version__

    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "versions": {
            "python": sys.version.split()[0],
            "numpy": numpy.__version__,
            "mlse": __version__,
        },
    }
    if extra:
        manifest.update(extra)
    target = Path(target)
    if target.is_dir():
        out = target / "manifest.json"
    else:
        out = target.parent / (target.name + ".manifest.json")
    with open(out, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return out
