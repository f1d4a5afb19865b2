import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from labelfusion.core import BinaryTask, annotations_from_dense, build_annotation_set, one_hot_expand
from labelfusion.em import (
    EmConfig,
    e_step,
    m_step,
    majority_init,
    observed_log_likelihood,
    run_binary_em,
    run_em,
)
from labelfusion.errors import ConfigError, EmptyAnnotations, NumericalError
from labelfusion.metrics import reliability_mae
from labelfusion.simulation import SimConfig, generate_annotations, hidden_matrix, sample_expert_profiles

from conftest import brute_force_posterior, random_task, single_sample_task

EPS = 1e-6


def test_majority_init_examples():
    assert majority_init(single_sample_task([1, 1, 1]))[0] == 1.0
    assert majority_init(single_sample_task([1, 1, 0]))[0] == pytest.approx(2 / 3)
    empty = BinaryTask.from_dense(np.zeros((1, 2)), np.zeros((1, 2), dtype=bool))
    assert majority_init(empty)[0] == 0.5


def test_e_step_uninformative_expert():
    assert e_step(single_sample_task([1]), [0.5], [0.5], 0.5)[0] == pytest.approx(0.5)


def test_e_step_two_expert_example():
    mu = e_step(single_sample_task([1, 0]), [0.9, 0.7], [0.8, 0.6], 0.5)[0]
    # a = 0.9 * 0.3, b = 0.2 * 0.6
    assert mu == pytest.approx(0.27 / (0.27 + 0.12), abs=1e-12)
    assert mu == pytest.approx(0.6923, abs=1e-4)


@pytest.mark.parametrize("q", [0.6, 0.8, 0.95])
@pytest.mark.parametrize("p", [0.2, 0.5, 0.7])
def test_e_step_symmetric_soft_vote_cancels(q, p):
    assert e_step(single_sample_task([0.5]), [q], [q], p)[0] == pytest.approx(p, abs=1e-12)


def test_e_step_unannotated_sample_returns_prior():
    task = BinaryTask.from_dense(np.zeros((1, 2)), np.zeros((1, 2), dtype=bool))
    assert e_step(task, [0.9, 0.9], [0.9, 0.9], 0.3)[0] == pytest.approx(0.3)


def test_e_step_rejects_unclamped_parameters():
    with pytest.raises(NumericalError):
        e_step(single_sample_task([0]), [1.0], [0.5], 0.5)


def test_m_step_examples():
    task = BinaryTask.from_dense(np.array([[1.0], [1.0]]), np.ones((2, 1), dtype=bool))
    alpha, beta, _ = m_step(task, np.array([1.0, 1.0]))
    assert alpha[0] == 1 - EPS

    task = BinaryTask.from_dense(np.array([[1.0], [0.0]]), np.ones((2, 1), dtype=bool))
    alpha, beta, prior = m_step(task, np.array([0.8, 0.2]))
    assert alpha[0] == pytest.approx(0.8)
    assert beta[0] == pytest.approx(0.8)
    assert prior == pytest.approx(0.5)

    task = BinaryTask.from_dense(np.array([[1.0, 0.0]]), np.array([[True, False]]))
    alpha, beta, _ = m_step(task, np.array([0.7]))
    assert alpha[1] == 0.5 and beta[1] == 0.5


def test_m_step_fixed_prior():
    task = single_sample_task([1])
    _, _, prior = m_step(task, np.array([0.9]), EmConfig(fixed_prior=0.3))
    assert prior == 0.3


def test_log_likelihood_examples():
    empty = BinaryTask.from_dense(np.zeros((4, 2)), np.zeros((4, 2), dtype=bool))
    # nothing observed: each sample contributes log(p + (1 - p)) = 0
    assert observed_log_likelihood(empty, [0.7, 0.7], [0.7, 0.7], 0.5) == 0.0
    ll = observed_log_likelihood(single_sample_task([1, 0]), [0.9, 0.7], [0.8, 0.6], 0.5)
    assert ll == pytest.approx(math.log(0.27 * 0.5 + 0.12 * 0.5), abs=1e-12)


def test_e_step_matches_enumeration_small():
    grid = [0.1, 0.35, 0.8]
    for labels in itertools.product((0, 1), repeat=3):
        for a, b in itertools.product(grid, repeat=2):
            alpha, beta = [a, 0.6, 0.9], [b, 0.7, 0.2]
            expected, evidence = brute_force_posterior(labels, alpha, beta, 0.4)
            task = single_sample_task(list(labels))
            assert e_step(task, alpha, beta, 0.4)[0] == pytest.approx(expected, abs=1e-12)
            assert observed_log_likelihood(task, alpha, beta, 0.4) == pytest.approx(math.log(evidence), abs=1e-12)


def test_hard_and_soft_paths_agree(rng):
    task = random_task(rng, n=20, r=5)
    soft = BinaryTask.from_dense(task.values.astype(float) * 1.0, task.mask)
    alpha = rng.uniform(0.05, 0.95, 5)
    beta = rng.uniform(0.05, 0.95, 5)
    assert np.array_equal(e_step(task, alpha, beta, 0.3), e_step(soft, alpha, beta, 0.3))


def test_run_em_single_source_fixpoint():
    y = np.array([0, 1, 1, 0, 1, 0, 0, 1])
    ann = annotations_from_dense(one_hot_expand(y, 2)[:, None, :], np.ones((8, 1, 2), dtype=bool))
    out = run_em(ann)
    assert np.array_equal(np.round(out.posterior[:, 1]), y)
    assert np.array_equal(np.round(out.posterior[:, 0]), 1 - y)


def test_run_em_single_iteration_equals_one_pass(rng):
    task = random_task(rng, n=15, r=3)
    state, iters, _ = run_binary_em(task, EmConfig(max_iterations=1))
    a, b, p = m_step(task, majority_init(task))
    assert iters == 1
    assert np.array_equal(state.mu, e_step(task, a, b, p))


def test_run_em_errors_and_config():
    with pytest.raises(EmptyAnnotations):
        run_em(build_annotation_set([], (3, 2, 2)))
    for bad in (dict(max_iterations=0), dict(tolerance=0.0), dict(epsilon_clamp=0.5)):
        with pytest.raises(ConfigError):
            EmConfig(**bad)


def test_dense_reliability_recovery():
    rng = np.random.default_rng(3)
    y = rng.integers(0, 2, 600)
    profiles = sample_expert_profiles(SimConfig(seed=11), 2)
    profiles = [type(p)(1.0, p.hidden_alpha, p.hidden_beta) for p in profiles]
    ann = generate_annotations(one_hot_expand(y, 2), profiles, seed=11)
    out = run_em(ann)
    assert reliability_mae(out.reliability.alpha, hidden_matrix(profiles)) <= 0.05


@given(seed=st.integers(0, 10_000), soft=st.booleans())
@settings(max_examples=60, deadline=None)
def test_log_likelihood_non_decreasing(seed, soft):
    task = random_task(np.random.default_rng(seed), n=25, r=4, density=0.6, soft=soft)
    state, _, _ = run_binary_em(task, EmConfig(max_iterations=50))
    trace = np.array(state.log_likelihood)
    assert np.all(np.diff(trace) >= -1e-8)


@given(seed=st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_expert_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    task = random_task(rng, n=20, r=5, soft=True)
    perm = rng.permutation(5)
    shuffled = BinaryTask.from_dense(task.values[:, perm], task.mask[:, perm])
    s1, _, _ = run_binary_em(task)
    s2, _, _ = run_binary_em(shuffled)
    assert np.allclose(s1.mu, s2.mu, atol=1e-12, rtol=0)
    assert np.allclose(s1.alpha[perm], s2.alpha, atol=1e-12, rtol=0)


@given(seed=st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_sample_permutation_equivariance(seed):
    rng = np.random.default_rng(seed)
    task = random_task(rng, n=20, r=4)
    perm = rng.permutation(20)
    shuffled = BinaryTask.from_dense(task.values[perm], task.mask[perm])
    s1, _, _ = run_binary_em(task)
    s2, _, _ = run_binary_em(shuffled)
    assert np.allclose(s1.mu[perm], s2.mu, atol=1e-12, rtol=0)
    assert np.allclose(s1.alpha, s2.alpha, atol=1e-12, rtol=0)
