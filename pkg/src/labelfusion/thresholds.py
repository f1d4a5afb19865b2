"""Cut-off techniques turning class probabilities into hard labels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from labelfusion.errors import DimensionMismatch, EmptyInput, IndexOutOfBounds, ValueOutOfRange

METHODS = ("default", "gt_prior", "model_posterior")


@dataclass(frozen=True)
class ThresholdVector:
    t: np.ndarray
    method: str

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float).ravel()
        if np.any((t < 0) | (t > 1)):
            raise ValueOutOfRange("thresholds must lie in [0, 1]")
        if self.method not in METHODS:
            raise ValueOutOfRange(f"unknown threshold method {self.method!r}")
        t.setflags(write=False)
        object.__setattr__(self, "t", t)

    def __len__(self):
        return self.t.shape[0]


def default_thresholds(n_classes: int, single_label: bool = False) -> ThresholdVector:
    """0.5 per class for binary/multi-label decisions, 1/K for single-label argmax."""
    if n_classes < 2:
        raise ValueOutOfRange("need at least two classes")
    value = 1.0 / n_classes if single_label else 0.5
    return ThresholdVector(np.full(n_classes, value), "default")


def gt_prior_thresholds(true_labels, n_classes: int) -> ThresholdVector:
    y = np.asarray(true_labels, dtype=np.int64).ravel()
    if y.size == 0:
        raise EmptyInput("no labels to estimate a prior from")
    if y.min() < 0 or y.max() >= n_classes:
        raise IndexOutOfBounds("label outside range(n_classes)")
    return ThresholdVector(np.bincount(y, minlength=n_classes) / y.size, "gt_prior")


def model_posterior_thresholds(pool_predictions) -> ThresholdVector:
    """Mean predicted probability per class over the whole training pool."""
    p = np.asarray(pool_predictions, dtype=float)
    if p.ndim != 2 or p.shape[0] == 0:
        raise EmptyInput("need an N x K prediction matrix with N >= 1")
    return ThresholdVector(p.mean(axis=0), "model_posterior")


def _as_t(predictions, thresholds):
    p = np.asarray(predictions, dtype=float)
    t = thresholds.t if isinstance(thresholds, ThresholdVector) else np.asarray(thresholds, dtype=float)
    if p.ndim != 2 or p.shape[1] != t.shape[0]:
        raise DimensionMismatch(f"predictions {p.shape} vs {t.shape[0]} thresholds")
    return p, t


def assign_multilabel(predictions, thresholds) -> np.ndarray:
    p, t = _as_t(predictions, thresholds)
    return (p >= t).astype(np.int64)


def assign_single_label(predictions, thresholds) -> np.ndarray:
    """argmax_c (p_ic - t_c); np.argmax already breaks ties toward the lowest index."""
    p, t = _as_t(predictions, thresholds)
    return np.argmax(p - t, axis=1).astype(np.int64)
