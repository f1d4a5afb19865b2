"""Binary one-vs-rest EM consensus over sensitivity/specificity annotator models.

Soft annotations enter the per-sample likelihoods as fractional exponents, so a
value of 0.7 counts as 0.7 of a positive vote and 0.3 of a negative one.  With
hard labels this is the usual two-coin annotator model.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from labelfusion.core import (
    AnnotationSet,
    BinaryTask,
    ConsensusOutput,
    ExpertReliability,
    restrict,
)
from labelfusion.errors import ConfigError, EmptyAnnotations, NumericalError


@dataclass(frozen=True)
class EmConfig:
    max_iterations: int = 100
    tolerance: float = 1e-6
    epsilon_clamp: float = 1e-6
    # None -> dummy class prior re-estimated every M-step, float -> fixed prior
    fixed_prior: Optional[float] = None

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")
        if not self.tolerance > 0:
            raise ConfigError("tolerance must be > 0")
        if not 0 < self.epsilon_clamp < 0.5:
            raise ConfigError("epsilon_clamp must lie in (0, 0.5)")
        if self.fixed_prior is not None and not 0 < self.fixed_prior < 1:
            raise ConfigError("fixed_prior must lie in (0, 1)")

    @property
    def prior_mode(self) -> str:
        return "dummy_prior" if self.fixed_prior is None else "fixed"


@dataclass
class EmState:
    """Current parameter set for one binary task."""

    mu: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    prior: np.ndarray
    log_likelihood: list = field(default_factory=list)


def majority_init(task: BinaryTask) -> np.ndarray:
    counts = task.mask.sum(axis=1)
    votes = (task.values * task.mask).sum(axis=1)
    mu = np.full(task.n_samples, 0.5)
    has = counts > 0
    mu[has] = votes[has] / counts[has]
    return mu


def _log_evidence(task: BinaryTask, alpha, beta):
    """Return (log a_i, log b_i) for every sample."""
    y = task.values
    m = task.mask.astype(float)
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        la1, la0 = np.log(alpha), np.log1p(-alpha)
        lb0, lb1 = np.log(beta), np.log1p(-beta)
        # 0 * log(0) terms are masked out explicitly, an unmasked one is an error
        log_a = np.where(m > 0, y * la1 + (1 - y) * la0, 0.0).sum(axis=1)
        log_b = np.where(m > 0, (1 - y) * lb0 + y * lb1, 0.0).sum(axis=1)
    if not (np.all(np.isfinite(log_a)) and np.all(np.isfinite(log_b))):
        raise NumericalError("non-finite evidence; are alpha/beta clamped to (0, 1)?")
    return log_a, log_b


def _prior_vector(prior, n: int) -> np.ndarray:
    p = np.broadcast_to(np.asarray(prior, dtype=float), (n,))
    if np.any((p <= 0) | (p >= 1)):
        raise NumericalError("prior must lie strictly inside (0, 1)")
    return p


def e_step(task: BinaryTask, alpha, beta, prior) -> np.ndarray:
    """Posterior probability of the positive class for every sample."""
    log_a, log_b = _log_evidence(task, alpha, beta)
    p = _prior_vector(prior, task.n_samples)
    pos = log_a + np.log(p)
    neg = log_b + np.log1p(-p)
    mu = np.exp(pos - np.logaddexp(pos, neg))
    if not np.all(np.isfinite(mu)):
        raise NumericalError("non-finite posterior")
    return mu


def m_step(task: BinaryTask, mu, config: EmConfig = EmConfig()):
    """Update (alpha, beta, prior) from the current posteriors.

    Experts without data, or with a zero denominator, fall back to 0.5.
    Everything is clamped to [eps, 1 - eps].
    """
    mu = np.asarray(mu, dtype=float)
    eps = config.epsilon_clamp
    m = task.mask.astype(float)
    y = task.values
    pos_w = (m * mu[:, None]).sum(axis=0)
    neg_w = (m * (1 - mu)[:, None]).sum(axis=0)
    pos_hit = (m * mu[:, None] * y).sum(axis=0)
    neg_hit = (m * (1 - mu)[:, None] * (1 - y)).sum(axis=0)
    alpha = np.full(task.n_experts, 0.5)
    beta = np.full(task.n_experts, 0.5)
    np.divide(pos_hit, pos_w, out=alpha, where=pos_w > 0)
    np.divide(neg_hit, neg_w, out=beta, where=neg_w > 0)
    alpha = np.clip(alpha, eps, 1 - eps)
    beta = np.clip(beta, eps, 1 - eps)
    if config.fixed_prior is None:
        prior = float(np.clip(mu.mean(), eps, 1 - eps))
    else:
        prior = float(config.fixed_prior)
    return alpha, beta, prior


def observed_log_likelihood(task: BinaryTask, alpha, beta, prior) -> float:
    """sum_i log(a_i p_i + b_i (1 - p_i)), evaluated in log space."""
    log_a, log_b = _log_evidence(task, alpha, beta)
    p = _prior_vector(prior, task.n_samples)
    ll = float(np.logaddexp(log_a + np.log(p), log_b + np.log1p(-p)).sum())
    if not np.isfinite(ll):
        raise NumericalError("non-finite log-likelihood")
    return ll


def run_binary_em(task: BinaryTask, config: EmConfig = EmConfig()):
    """EM on one binary task.  Returns (EmState, iterations, converged)."""
    mu = majority_init(task)
    trace = []
    converged = False
    it = 0
    alpha = beta = None
    prior = 0.5
    for it in range(1, config.max_iterations + 1):
        alpha, beta, prior = m_step(task, mu, config)
        trace.append(observed_log_likelihood(task, alpha, beta, prior))
        new_mu = e_step(task, alpha, beta, prior)
        delta = float(np.mean(np.abs(new_mu - mu)))
        mu = new_mu
        if delta < config.tolerance:
            converged = True
            break
    state = EmState(mu=mu, alpha=alpha, beta=beta, prior=np.full(task.n_samples, prior), log_likelihood=trace)
    return state, it, converged


def run_em_tasks(tasks, config: EmConfig = EmConfig()) -> ConsensusOutput:
    """Run independent binary EM on a list of per-class tasks and assemble the output."""
    states = [run_binary_em(t, config) for t in tasks]
    posterior = np.column_stack([s.mu for s, _, _ in states])
    alpha = np.column_stack([s.alpha for s, _, _ in states])
    beta = np.column_stack([s.beta for s, _, _ in states])
    return ConsensusOutput(
        posterior=posterior,
        reliability=ExpertReliability(alpha, beta),
        prior=np.array([s.prior[0] for s, _, _ in states]),
        iterations=tuple(it for _, it, _ in states),
        converged=tuple(c for _, _, c in states),
        log_likelihood_trace=tuple(tuple(s.log_likelihood) for s, _, _ in states),
    )


def run_em(annotations: AnnotationSet, config: EmConfig = EmConfig()) -> ConsensusOutput:
    """Plain EM consensus, one binary run per class."""
    if len(annotations) == 0:
        raise EmptyAnnotations("no annotation entries at all")
    tasks = [restrict(annotations, c) for c in range(annotations.n_classes)]
    return run_em_tasks(tasks, config)
