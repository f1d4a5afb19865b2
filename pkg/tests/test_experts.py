import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from labelfusion.errors import ConfigError, DimensionMismatch
from labelfusion.experts import (
    ClassifierSpec,
    TrainedClassifier,
    logistic_loss_and_grad,
    predict_proba,
    train_expert_model,
)


def central_difference(fn, params, h=1e-5):
    grad = np.zeros_like(params)
    for i in range(params.size):
        up, down = params.copy(), params.copy()
        up[i] += h
        down[i] -= h
        grad[i] = (fn(up) - fn(down)) / (2 * h)
    return grad


def test_separable_pair_is_fit():
    X = np.array([[0.0], [1.0]])
    y = np.array([0, 1])
    model = train_expert_model(X, y, ClassifierSpec(minimum_training_size=1))
    pred = (predict_proba(model, X) >= 0.5).astype(int)
    assert np.mean(pred == y) == 1.0


def test_single_class_gives_laplace_constant():
    model = train_expert_model(np.zeros((3, 2)), np.ones(3))
    assert model.constant == pytest.approx(0.8)
    assert np.allclose(predict_proba(model, np.ones((4, 2))), 0.8)


def test_small_training_set_gives_constant():
    model = train_expert_model(np.eye(4), np.array([0, 1, 1, 0]))
    assert model.is_constant and model.constant == pytest.approx(0.5)


def test_dummy_prior_model():
    y = np.array([1, 0, 0, 1, 0, 0, 0, 1, 0, 0])
    model = train_expert_model(np.zeros((10, 3)), y, ClassifierSpec(kind="dummy_prior"))
    assert model.constant == pytest.approx(0.3)
    assert np.allclose(predict_proba(model, np.zeros((4, 3))), [0.3] * 4)


def test_zero_weight_model_predicts_half():
    model = TrainedClassifier("logistic_regression", 3, weights=np.zeros(3), intercept=0.0)
    assert np.all(predict_proba(model, np.random.default_rng(0).random((5, 3))) == 0.5)


def test_monotone_in_feature_for_positive_weight():
    rng = np.random.default_rng(1)
    X = rng.random((60, 1))
    y = (X[:, 0] + 0.2 * rng.standard_normal(60) > 0.5).astype(float)
    model = train_expert_model(X, y)
    assert model.weights[0] > 0
    grid = np.linspace(0, 1, 50)[:, None]
    assert np.all(np.diff(predict_proba(model, grid)) > 0)


def test_dimension_checks():
    with pytest.raises(DimensionMismatch):
        train_expert_model(np.zeros((3, 2)), np.zeros(4))
    model = train_expert_model(np.zeros((3, 2)), np.ones(3))
    with pytest.raises(DimensionMismatch):
        predict_proba(model, np.zeros((2, 3)))
    with pytest.raises(ConfigError):
        ClassifierSpec(learning_rate=0.0)


def test_outputs_never_saturate():
    X = np.array([[0.0]] * 10 + [[1.0]] * 10)
    y = np.array([0] * 10 + [1] * 10)
    model = train_expert_model(X, y, ClassifierSpec(learning_rate=50.0, max_iterations=2000, l2_penalty=0.0))
    p = predict_proba(model, np.array([[-100.0], [100.0]]))
    assert 0 < p[0] and p[1] < 1


def test_deterministic_training():
    rng = np.random.default_rng(5)
    X, y = rng.random((40, 3)), rng.integers(0, 2, 40)
    a = train_expert_model(X, y)
    b = train_expert_model(X, y)
    assert np.array_equal(a.weights, b.weights) and a.intercept == b.intercept


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    n, d = rng.integers(3, 15), rng.integers(1, 5)
    X, y = rng.random((n, d)), rng.random(n)
    params = rng.normal(size=d + 1)
    _, grad = logistic_loss_and_grad(params, X, y, 0.1)
    numeric = central_difference(lambda p: logistic_loss_and_grad(p, X, y, 0.1)[0], params)
    assert np.linalg.norm(grad - numeric) <= 1e-4 * max(np.linalg.norm(numeric), 1e-8)
