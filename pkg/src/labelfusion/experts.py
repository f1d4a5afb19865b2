"""Per-expert classifiers used to extend annotations to unlabeled samples."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from labelfusion.errors import ConfigError, DimensionMismatch, EmptyInput

PROBA_CLIP = 1e-9
KINDS = ("logistic_regression", "dummy_prior")


@dataclass(frozen=True)
class ClassifierSpec:
    kind: str = "logistic_regression"
    max_iterations: int = 500
    learning_rate: float = 1.0
    l2_penalty: float = 1e-4
    convergence_tolerance: float = 1e-6
    minimum_training_size: int = 5

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown classifier kind {self.kind!r}")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0")
        if self.l2_penalty < 0:
            raise ConfigError("l2_penalty must be >= 0")


@dataclass(frozen=True)
class TrainedClassifier:
    kind: str
    n_features: int
    weights: Optional[np.ndarray] = None
    intercept: float = 0.0
    constant: Optional[float] = None
    trained_on: tuple = ()

    @property
    def is_constant(self) -> bool:
        return self.constant is not None


def _sigmoid(z):
    return np.exp(-np.logaddexp(0.0, -z))


def logistic_loss_and_grad(params, X, y, l2: float):
    """Mean binary cross-entropy plus ``l2/2 * ||w||^2`` and its gradient.

    ``params`` is ``[w_1..w_D, b]``; the intercept is not penalized.
    """
    w, b = params[:-1], params[-1]
    z = X @ w + b
    # log(1 + e^z) - y z, computed without overflow
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * (w @ w))
    r = _sigmoid(z) - y
    grad = np.empty_like(params, dtype=float)
    grad[:-1] = X.T @ r / X.shape[0] + l2 * w
    grad[-1] = r.mean()
    return loss, grad


def lipschitz_bound(X, l2: float) -> float:
    """Upper bound on the curvature of the penalized mean cross-entropy."""
    Xb = np.hstack([X, np.ones((X.shape[0], 1))])
    return 0.25 * np.linalg.norm(Xb, 2) ** 2 / X.shape[0] + l2


def _constant(p: float, n_features: int, idx, kind="logistic_regression") -> TrainedClassifier:
    return TrainedClassifier(kind=kind, n_features=n_features, constant=float(p), trained_on=idx)


def train_expert_model(features, labels, spec: ClassifierSpec = ClassifierSpec(), sample_index=None) -> TrainedClassifier:
    """Fit f^j on one expert's annotations.

    Labels may be soft; the cross-entropy accepts targets in [0, 1].
    Single-class or tiny training sets yield a Laplace-smoothed constant.
    Full-batch gradient descent from zero weights; the step is
    ``min(learning_rate, 1 / L)`` with L the gradient's Lipschitz bound.
    """
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise DimensionMismatch(f"features {X.shape} do not match labels {y.shape}")
    n, d = X.shape
    if n < 1:
        raise EmptyInput("cannot train on zero samples")
    idx = tuple(int(i) for i in (range(n) if sample_index is None else sample_index))
    if spec.kind == "dummy_prior":
        return _constant(y.mean(), d, idx, kind="dummy_prior")
    if n < spec.minimum_training_size or np.all(y == y[0]):
        return _constant((y.sum() + 1.0) / (n + 2.0), d, idx)

    step = min(spec.learning_rate, 1.0 / lipschitz_bound(X, spec.l2_penalty))
    params = np.zeros(d + 1)
    for _ in range(spec.max_iterations):
        _, grad = logistic_loss_and_grad(params, X, y, spec.l2_penalty)
        if np.max(np.abs(grad)) < spec.convergence_tolerance:
            break
        params = params - step * grad
    return TrainedClassifier(
        kind="logistic_regression",
        n_features=d,
        weights=params[:-1].copy(),
        intercept=float(params[-1]),
        trained_on=idx,
    )


def predict_proba(model: TrainedClassifier, features) -> np.ndarray:
    X = np.asarray(features, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise DimensionMismatch(f"expected {model.n_features} features, got shape {X.shape}")
    if model.is_constant:
        p = np.full(X.shape[0], model.constant)
    else:
        p = _sigmoid(X @ model.weights + model.intercept)
    return np.clip(p, PROBA_CLIP, 1 - PROBA_CLIP)
