import dataclasses
import itertools

import numpy as np
import pytest

from labelfusion.core import BinaryTask, one_hot_expand
from labelfusion.data import make_blobs, stratified_split
from labelfusion.simulation import SimConfig, generate_annotations, sample_expert_profiles


def brute_force_posterior(labels, alpha, beta, prior):
    """P(y=1 | hard labels) by summing the joint over both latent classes."""
    joint = {}
    for truth in (0, 1):
        prob = prior if truth == 1 else 1 - prior
        for y, a, b in zip(labels, alpha, beta):
            if truth == 1:
                prob *= a if y == 1 else 1 - a
            else:
                prob *= b if y == 0 else 1 - b
        joint[truth] = prob
    return joint[1] / (joint[0] + joint[1]), joint[0] + joint[1]


def single_sample_task(labels):
    values = np.array([labels], dtype=float)
    return BinaryTask.from_dense(values, np.ones_like(values, dtype=bool))


def random_task(rng, n=12, r=4, density=0.5, soft=False):
    mask = rng.random((n, r)) < density
    values = rng.random((n, r)) if soft else (rng.random((n, r)) < 0.6).astype(float)
    return BinaryTask.from_dense(values, mask)


def blob_benchmark(seed, n_train=2000, n_test=800, positive_fraction=0.5, participation=None, data_seed=1234):
    """Two-blob train/test split plus simulated annotations for ``seed``."""
    full = make_blobs(n_train + n_test, seed=data_seed, positive_fraction=positive_fraction)
    train, test = stratified_split(full, n_test / (n_train + n_test), seed=data_seed)
    profiles = sample_expert_profiles(SimConfig(seed=seed), 2)
    if participation is not None:
        profiles = [dataclasses.replace(p, participation=participation) for p in profiles]
    ann = generate_annotations(one_hot_expand(train.true_labels, 2), profiles, seed)
    return train, test, profiles, ann


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def all_sign_patterns(n):
    return itertools.product((0, 1), repeat=n)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
