"""Synthetic noisy annotators drawn from ground-truth labels.

Randomness comes from numpy's PCG64 seeded through ``SeedSequence`` with a
hierarchical spawn key: (master seed, stage, expert).  Every expert owns its
own stream, so results do not depend on how many experts are generated after
it or in what order they are processed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from labelfusion.core import AnnotationSet, annotations_from_dense
from labelfusion.errors import ConfigError, DimensionMismatch

_PROFILE_STREAM = 0
_ANNOTATION_STREAM = 1


@dataclass(frozen=True)
class SimConfig:
    n_experts: int = 15
    participation_beta: tuple = (1.0, 20.0)
    reliability_beta: tuple = (4.0, 1.0)
    seed: int = 0

    def __post_init__(self):
        if self.n_experts < 1:
            raise ConfigError("n_experts must be >= 1")
        for pair in (self.participation_beta, self.reliability_beta):
            if len(pair) != 2 or min(pair) <= 0:
                raise ConfigError(f"Beta shape parameters must be positive, got {pair}")
        object.__setattr__(self, "participation_beta", tuple(float(x) for x in self.participation_beta))
        object.__setattr__(self, "reliability_beta", tuple(float(x) for x in self.reliability_beta))


@dataclass(frozen=True)
class ExpertProfile:
    participation: float
    hidden_alpha: np.ndarray
    hidden_beta: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.hidden_alpha, dtype=float).ravel()
        b = np.asarray(self.hidden_beta, dtype=float).ravel()
        if a.shape != b.shape:
            raise DimensionMismatch("hidden_alpha and hidden_beta must have one entry per class")
        if not 0 <= self.participation <= 1 or np.any((a < 0) | (a > 1)) or np.any((b < 0) | (b > 1)):
            raise ConfigError("profile values must lie in [0, 1]")
        object.__setattr__(self, "hidden_alpha", a)
        object.__setattr__(self, "hidden_beta", b)

    def __eq__(self, other):
        if not isinstance(other, ExpertProfile):
            return NotImplemented
        return (
            self.participation == other.participation
            and np.array_equal(self.hidden_alpha, other.hidden_alpha)
            and np.array_equal(self.hidden_beta, other.hidden_beta)
        )

    __hash__ = None

    @property
    def n_classes(self) -> int:
        return self.hidden_alpha.shape[0]

    def to_dict(self) -> dict:
        return {
            "participation": float(self.participation),
            "hidden_alpha": [float(x) for x in self.hidden_alpha],
            "hidden_beta": [float(x) for x in self.hidden_beta],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExpertProfile":
        return cls(float(d["participation"]), d["hidden_alpha"], d["hidden_beta"])


def expert_rng(seed: int, stage: int, expert: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(stage, expert))
    return np.random.Generator(np.random.PCG64(ss))


def sample_beta(rng: np.random.Generator, a: float, b: float, size=None):
    """Beta(a, b) as X / (X + Y) with X ~ Gamma(a, 1), Y ~ Gamma(b, 1)."""
    x = rng.standard_gamma(a, size)
    y = rng.standard_gamma(b, size)
    return x / (x + y)


def sample_expert_profiles(config: SimConfig, n_classes: int) -> list:
    profiles = []
    pa, pb = config.participation_beta
    ra, rb = config.reliability_beta
    for j in range(config.n_experts):
        rng = expert_rng(config.seed, _PROFILE_STREAM, j)
        r = float(sample_beta(rng, pa, pb))
        alpha = sample_beta(rng, ra, rb, n_classes)
        beta = sample_beta(rng, ra, rb, n_classes)
        profiles.append(ExpertProfile(r, alpha, beta))
    return profiles


def generate_annotations(true_one_hot, profiles, seed: int, expert_ids=()) -> AnnotationSet:
    """Sparse noisy annotations of a one-hot label matrix.

    One participation draw per (expert, sample) is shared by all classes; the
    label noise is drawn per class.
    """
    y = np.asarray(true_one_hot)
    if y.ndim != 2:
        raise DimensionMismatch("true labels must be an N x K one-hot matrix")
    n, k = y.shape
    for p in profiles:
        if p.n_classes != k:
            raise DimensionMismatch(f"profile has {p.n_classes} classes, labels have {k}")
    r = len(profiles)
    values = np.zeros((n, r, k))
    mask = np.zeros((n, r, k), dtype=bool)
    positive = y == 1
    for j, prof in enumerate(profiles):
        rng = expert_rng(seed, _ANNOTATION_STREAM, j)
        takes = rng.random(n) < prof.participation
        u = rng.random((n, k))
        # positive: label ~ Bernoulli(alpha); negative: label = 1 - Bernoulli(beta)
        label = np.where(positive, u < prof.hidden_alpha, ~(u < prof.hidden_beta))
        values[:, j, :] = label
        mask[takes, j, :] = True
    return annotations_from_dense(values, mask, expert_ids)


def hidden_matrix(profiles, which: str = "alpha") -> np.ndarray:
    """R x K matrix of hidden sensitivities (``which='alpha'``) or specificities."""
    attr = "hidden_alpha" if which == "alpha" else "hidden_beta"
    return np.vstack([getattr(p, attr) for p in profiles])
