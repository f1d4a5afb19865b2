import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from labelfusion.errors import AllZeroDifferences, DegenerateInput, DimensionMismatch, EmptyInput, NoEvaluableClass
from labelfusion.metrics import (
    average_ranks,
    balanced_accuracy,
    pearson,
    reliability_mae,
    roc_auc_macro,
    spearman,
    wilcoxon_one_sided,
)


def pairwise_auc(scores, positive):
    pos, neg = scores[positive], scores[~positive]
    wins = (pos[:, None] > neg[None, :]).sum() + 0.5 * (pos[:, None] == neg[None, :]).sum()
    return wins / (pos.size * neg.size)


def auc_oracle(p, y):
    vals = [pairwise_auc(p[:, c], y == c) for c in range(p.shape[1]) if 0 < (y == c).sum() < y.size]
    return float(np.mean(vals))


def bac_oracle(pred, y, k):
    cm = np.zeros((k, k))
    for t, q in zip(y, pred):
        cm[t, q] += 1
    present = cm.sum(axis=1) > 0
    return float(np.mean(np.diag(cm)[present] / cm.sum(axis=1)[present]))


def enumeration_pvalue(d):
    d = np.asarray(d, dtype=float)
    d = d[d != 0]
    ranks = average_ranks(np.abs(d))
    observed = ranks[d > 0].sum()
    n = d.size
    hits = sum(1 for signs in itertools.product((0, 1), repeat=n) if ranks[np.array(signs, bool)].sum() >= observed - 1e-9)
    return hits / 2**n


def test_auc_examples():
    assert roc_auc_macro([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == pytest.approx(0.75, abs=1e-12)
    assert roc_auc_macro([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    assert roc_auc_macro([0.5] * 4, [0, 1, 0, 1]) == 0.5


def test_auc_skips_absent_classes():
    p = np.array([[0.7, 0.2, 0.1], [0.2, 0.7, 0.1], [0.6, 0.3, 0.1]])
    assert roc_auc_macro(p, [0, 1, 0]) == pytest.approx(1.0)
    with pytest.raises(NoEvaluableClass):
        roc_auc_macro([[0.4, 0.6], [0.3, 0.7]], [1, 1])


def test_bac_examples():
    assert balanced_accuracy([1, 0, 1, 1], [1, 0, 0, 1], 2) == pytest.approx(0.75)
    assert balanced_accuracy([2, 0, 1], [2, 0, 1], 3) == 1.0
    assert balanced_accuracy([1, 1, 1, 1], [0, 1, 0, 1], 2) == 0.5
    with pytest.raises(EmptyInput):
        balanced_accuracy([], [], 2)


def test_mae_examples():
    assert reliability_mae([0.9, 0.7], [0.8, 0.8]) == pytest.approx(0.1)
    assert reliability_mae(np.zeros((3, 2)), np.ones((3, 2))) == 1.0
    with pytest.raises(DimensionMismatch):
        reliability_mae(np.zeros((3, 2)), np.zeros((2, 2)))


def test_correlation_examples():
    assert pearson([1, 2, 3], [1, 2, 4]) == pytest.approx(0.9820, abs=1e-4)
    assert pearson([1, 2, 3], [-1, -2, -3]) == -1.0
    assert spearman([1, 2, 3], [3, 2, 1]) == -1.0
    assert average_ranks([1, 2, 2, 4]).tolist() == [1, 2.5, 2.5, 4]
    with pytest.raises(DegenerateInput):
        pearson([1, 1, 1], [1, 2, 3])


def test_wilcoxon_examples():
    assert wilcoxon_one_sided([2, 3, 4, 5, 6], [1, 1, 1, 1, 1]) == 0.03125
    # four positive differences, one negative carrying the smallest rank
    assert wilcoxon_one_sided([1.1, 2, 3, 4, 5], [1.2, 0, 0, 0, 0]) == 0.0625
    with pytest.raises(AllZeroDifferences):
        wilcoxon_one_sided([1, 2, 3], [1, 2, 3])


@pytest.mark.parametrize("n", range(1, 11))
def test_wilcoxon_all_positive_is_two_to_minus_n(n):
    assert wilcoxon_one_sided(np.arange(n) + 1.0, np.zeros(n)) == 2.0**-n


@given(st.lists(st.integers(-4, 4), min_size=1, max_size=10).filter(lambda d: any(d)))
@settings(max_examples=150, deadline=None)
def test_wilcoxon_matches_enumeration(d):
    d = np.array(d, dtype=float)
    assert wilcoxon_one_sided(d, np.zeros_like(d)) == pytest.approx(enumeration_pvalue(d), abs=1e-12)


@given(st.integers(0, 10_000))
@settings(max_examples=100, deadline=None)
def test_auc_and_bac_match_oracles(seed):
    rng = np.random.default_rng(seed)
    n, k = rng.integers(2, 40), rng.integers(2, 5)
    y = rng.integers(0, k, n)
    # coarse scores force plenty of ties
    p = rng.integers(0, 6, (n, k)) / 5
    if len(np.unique(y)) > 1:
        assert roc_auc_macro(p, y) == pytest.approx(auc_oracle(p, y), abs=1e-12)
    pred = rng.integers(0, k, n)
    assert balanced_accuracy(pred, y, k) == pytest.approx(bac_oracle(pred, y, k), abs=1e-12)


@given(st.integers(0, 10_000))
@settings(max_examples=50, deadline=None)
def test_auc_invariant_to_monotone_transform(seed):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, 30)
    y[:2] = [0, 1]
    s = rng.random(30)
    assert roc_auc_macro(s, y) == pytest.approx(roc_auc_macro(np.exp(3 * s) - 1, y), abs=1e-12)


@given(st.integers(0, 10_000))
@settings(max_examples=50, deadline=None)
def test_bac_invariant_to_relabeling(seed):
    rng = np.random.default_rng(seed)
    k = 4
    y, pred = rng.integers(0, k, 25), rng.integers(0, k, 25)
    perm = rng.permutation(k)
    assert balanced_accuracy(perm[pred], perm[y], k) == pytest.approx(balanced_accuracy(pred, y, k), abs=1e-12)


@given(st.integers(0, 10_000))
@settings(max_examples=50, deadline=None)
def test_spearman_is_pearson_on_ranks(seed):
    rng = np.random.default_rng(seed)
    x, y = rng.integers(0, 5, 12).astype(float), rng.random(12)
    if np.ptp(x) == 0:
        return
    assert spearman(x, y) == pearson(average_ranks(x), average_ranks(y))
    assert -1 <= spearman(x, y) <= 1
