"""Partial training paths and their sampling schedule.

A path names which encoders feed a mini-batch and which decoders are
trained from it. A schedule assigns each path a sampling coefficient;
mini-batches stay homogeneous (one path per batch).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

COEFF_TOL = 1e-9
BALANCE_TOL = 0.01


@dataclass(frozen=True)
class TrainingPath:
    """Source-language set (M) to target-language set (N)."""

    sources: tuple
    targets: tuple
    allow_autoencode: bool = False

    def __init__(self, sources, targets, allow_autoencode: bool = False):
        object.__setattr__(self, "sources", tuple(sorted(set(sources))))
        object.__setattr__(self, "targets", tuple(sorted(set(targets))))
        object.__setattr__(self, "allow_autoencode", bool(allow_autoencode))
        if not self.sources or not self.targets:
            raise ValueError("a training path needs >= 1 source and >= 1 target")
        overlap = set(self.sources) & set(self.targets)
        if overlap and not self.allow_autoencode:
            raise ValueError(
                f"languages {sorted(overlap)} appear as both source and target; "
                "auto-encoding must be enabled explicitly"
            )

    @property
    def m(self) -> int:
        return len(self.sources)

    @property
    def n(self) -> int:
        return len(self.targets)

    @property
    def strategy(self) -> str:
        return f"{self.m}:{self.n}"

    def languages(self) -> tuple:
        return tuple(sorted(set(self.sources) | set(self.targets)))


@dataclass(frozen=True)
class PathSchedule:
    """Paths with sampling coefficients that must sum to 1."""

    entries: tuple = field(default_factory=tuple)

    def __init__(self, entries):
        entries = tuple((path, float(coeff)) for path, coeff in entries)
        if not entries:
            raise ValueError("schedule needs at least one path")
        for path, coeff in entries:
            if not isinstance(path, TrainingPath):
                raise TypeError(f"expected TrainingPath, got {type(path).__name__}")
            if coeff <= 0.0:
                raise ValueError(f"coefficient for {path.strategy} must be > 0")
        total = sum(c for _, c in entries)
        if abs(total - 1.0) > COEFF_TOL:
            raise ValueError(f"coefficients sum to {total}, expected 1")
        object.__setattr__(self, "entries", entries)

    def languages(self) -> tuple:
        langs = set()
        for path, _ in self.entries:
            langs |= set(path.languages())
        return tuple(sorted(langs))

    def source_languages(self) -> tuple:
        langs = set()
        for path, _ in self.entries:
            langs |= set(path.sources)
        return tuple(sorted(langs))

    def target_languages(self) -> tuple:
        langs = set()
        for path, _ in self.entries:
            langs |= set(path.targets)
        return tuple(sorted(langs))


def sample_path(schedule: PathSchedule, rng: np.random.Generator) -> TrainingPath:
    """Draw one path i.i.d. by coefficient."""
    u = rng.random()
    acc = 0.0
    for path, coeff in schedule.entries:
        acc += coeff
        if u < acc:
            return path
    return schedule.entries[-1][0]


def validate_schedule(schedule: PathSchedule, languages) -> dict:
    """Check that every language gets an encoder trained, and report
    how often each encoder sees a sentence.

    An M:1 batch counts once per participating encoder. Returns
    {"batch_fraction_by_strategy", "exposure", "balanced"}; exposure
    is each encoder's share of all sentence presentations. Logs a
    warning when shares differ by more than 1%.
    """
    languages = tuple(languages)
    sources = set(schedule.source_languages())
    missing = [lang for lang in languages if lang not in sources]
    if missing:
        raise ValueError(
            f"languages {missing} never appear in a source set; "
            "their encoders would receive no gradient"
        )
    by_strategy: dict = {}
    presentations: dict = {lang: 0.0 for lang in sources}
    total = 0.0
    for path, coeff in schedule.entries:
        by_strategy[path.strategy] = by_strategy.get(path.strategy, 0.0) + coeff
        for lang in path.sources:
            presentations[lang] += coeff
        total += coeff * path.m
    exposure = {lang: presentations[lang] / total for lang in sorted(presentations)}
    spread = max(exposure.values()) - min(exposure.values())
    balanced = spread <= BALANCE_TOL
    if not balanced:
        log.warning("encoder exposure is unbalanced (spread %.3f): %s", spread, exposure)
    return {
        "batch_fraction_by_strategy": dict(sorted(by_strategy.items())),
        "exposure": exposure,
        "balanced": balanced,
    }


def one_to_rest_schedule(languages) -> PathSchedule:
    """One 1:(L-1) path per language, equal coefficients.

    Each language is encoded and decoded into every other language; no
    auto-encoding.
    """
    languages = tuple(languages)
    if len(languages) < 2:
        raise ValueError("need at least 2 languages")
    coeff = 1.0 / len(languages)
    entries = []
    for lang in languages:
        rest = tuple(other for other in languages if other != lang)
        entries.append((TrainingPath([lang], rest), coeff))
    return PathSchedule(entries)


def one_to_one_schedule(pairs) -> PathSchedule:
    """Equal-coefficient 1:1 paths from (source, target) pairs."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("need at least one pair")
    coeff = 1.0 / len(pairs)
    return PathSchedule([(TrainingPath([s], [t]), coeff) for s, t in pairs])


def many_to_one_schedule(sources, target) -> PathSchedule:
    """A single M:1 path with averaged source embeddings."""
    return PathSchedule([(TrainingPath(sources, [target]), 1.0)])
