"""Annotation-quality, expert-estimation and model-quality metrics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from labelfusion.errors import (
    AllZeroDifferences,
    DegenerateInput,
    DimensionMismatch,
    EmptyInput,
    IndexOutOfBounds,
    NoEvaluableClass,
)


@dataclass
class MetricReport:
    auc_macro: float = float("nan")
    bac_by_cutoff: dict = field(default_factory=dict)
    reliability_mae: float = float("nan")
    pearson: float = float("nan")
    spearman: float = float("nan")


def _binary_auc(scores: np.ndarray, positive: np.ndarray) -> float:
    # Mann-Whitney U from average ranks; ties count one half
    ranks = rankdata(scores)
    n_pos = int(positive.sum())
    n_neg = positive.size - n_pos
    u = ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def roc_auc_macro(probabilities, true_labels) -> float:
    """Unweighted mean of one-vs-rest AUCs over classes with both outcomes present."""
    p = np.asarray(probabilities, dtype=float)
    y = np.asarray(true_labels, dtype=np.int64).ravel()
    if p.ndim == 1:
        p = np.column_stack([1 - p, p])
    if p.shape[0] != y.shape[0]:
        raise DimensionMismatch(f"{p.shape[0]} score rows vs {y.shape[0]} labels")
    if y.size < 2:
        raise EmptyInput("need at least two samples")
    aucs = []
    for c in range(p.shape[1]):
        pos = y == c
        if pos.all() or not pos.any():
            continue
        aucs.append(_binary_auc(p[:, c], pos))
    if not aucs:
        raise NoEvaluableClass("every class is single-valued")
    return float(np.mean(aucs))


def balanced_accuracy(predicted, true_labels, n_classes: int | None = None) -> float:
    """Mean recall over the classes present in ``true_labels``."""
    pred = np.asarray(predicted, dtype=np.int64).ravel()
    y = np.asarray(true_labels, dtype=np.int64).ravel()
    if y.size == 0:
        raise EmptyInput("no samples")
    if pred.shape != y.shape:
        raise DimensionMismatch("predicted and true label vectors differ in length")
    if n_classes is not None and (y.max() >= n_classes or pred.max() >= n_classes):
        raise IndexOutOfBounds("label outside range(n_classes)")
    recalls = [np.mean(pred[y == c] == c) for c in np.unique(y)]
    return float(np.mean(recalls))


def reliability_mae(estimated_alpha, hidden_alpha) -> float:
    est = np.asarray(estimated_alpha, dtype=float)
    hid = np.asarray(hidden_alpha, dtype=float)
    if est.shape != hid.shape:
        raise DimensionMismatch(f"estimate shape {est.shape} vs hidden {hid.shape}")
    return float(np.mean(np.abs(est - hid)))


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise DimensionMismatch("x and y differ in length")
    if x.size < 2:
        raise DegenerateInput("need at least two points")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx, syy = dx @ dx, dy @ dy
    if sxx == 0 or syy == 0:
        raise DegenerateInput("zero variance")
    r = float(dx @ dy / np.sqrt(sxx * syy))
    return min(1.0, max(-1.0, r))


def average_ranks(x) -> np.ndarray:
    return rankdata(np.asarray(x, dtype=float).ravel(), method="average")


def spearman(x, y) -> float:
    return pearson(average_ranks(x), average_ranks(y))


def _signed_rank_null_counts(doubled_ranks: np.ndarray) -> np.ndarray:
    """Number of sign patterns reaching each value of 2*W+ (subset-sum DP)."""
    total = int(doubled_ranks.sum())
    counts = np.zeros(total + 1, dtype=object)
    counts[0] = 1
    for r in doubled_ranks.astype(int):
        counts[r:] = counts[r:] + counts[: total + 1 - r].copy()
    return counts


def wilcoxon_one_sided(a, b) -> float:
    """Exact one-sided signed-rank p-value for the alternative ``a > b``.

    Zero differences are dropped; ties share average ranks.  The null
    distribution is the exact count over all 2^n sign patterns.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise DimensionMismatch("a and b differ in length")
    d = a - b
    d = d[d != 0]
    if d.size == 0:
        raise AllZeroDifferences("all paired differences are zero")
    doubled = np.rint(2 * rankdata(np.abs(d))).astype(int)
    w_plus = int(doubled[d > 0].sum())
    counts = _signed_rank_null_counts(doubled)
    return float(sum(counts[w_plus:]) / 2 ** d.size)
