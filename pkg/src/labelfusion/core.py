"""Shared data model: datasets, sparse annotation sets and consensus outputs.

Identifiers are opaque strings at the I/O boundary; everything in here works
on dense integer indices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from labelfusion.errors import (
    DimensionMismatch,
    DuplicateEntry,
    EmptyInput,
    IndexOutOfBounds,
    ValueOutOfRange,
)

RELIABILITY_EPS = 1e-6


def _frozen(a, dtype) -> np.ndarray:
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Feature matrix plus optional ground truth.

    ``features`` is N x D.  ``true_labels`` holds class indices in
    ``range(n_classes)`` or is None for an unlabeled pool.
    """

    features: np.ndarray
    n_classes: int
    true_labels: Optional[np.ndarray] = None
    sample_ids: tuple = ()
    class_names: tuple = ()

    def __post_init__(self):
        x = np.asarray(self.features, dtype=float)
        if x.ndim != 2:
            raise DimensionMismatch(f"features must be 2-D, got shape {x.shape}")
        if x.shape[0] < 1:
            raise EmptyInput("dataset needs at least one sample")
        if self.n_classes < 2:
            raise ValueOutOfRange("n_classes must be >= 2")
        if not np.all(np.isfinite(x)):
            raise ValueOutOfRange("features contain non-finite values")
        object.__setattr__(self, "features", _frozen(x, float))
        n = x.shape[0]
        if self.true_labels is not None:
            y = np.asarray(self.true_labels)
            if y.shape != (n,):
                raise DimensionMismatch("true_labels must be an N-vector")
            if np.any(y < 0) or np.any(y >= self.n_classes):
                raise IndexOutOfBounds("label outside range(n_classes)")
            object.__setattr__(self, "true_labels", _frozen(y, np.int64))
        ids = tuple(str(s) for s in self.sample_ids) or tuple(str(i) for i in range(n))
        if len(ids) != n:
            raise DimensionMismatch("sample_ids length differs from N")
        object.__setattr__(self, "sample_ids", ids)
        names = tuple(str(c) for c in self.class_names) or tuple(
            str(c) for c in range(self.n_classes)
        )
        object.__setattr__(self, "class_names", names)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            features=self.features[idx],
            n_classes=self.n_classes,
            true_labels=None if self.true_labels is None else self.true_labels[idx],
            sample_ids=tuple(self.sample_ids[i] for i in idx),
            class_names=self.class_names,
        )


@dataclass(frozen=True)
class BinaryTask:
    """Per-class view of an annotation set as dense N x R arrays.

    ``values[i, j]`` is expert j's label for sample i and is only meaningful
    where ``mask[i, j]`` is True.
    """

    values: np.ndarray
    mask: np.ndarray
    class_id: int = 0

    @classmethod
    def from_dense(cls, values, mask=None, class_id=0) -> "BinaryTask":
        values = np.asarray(values, dtype=float)
        if mask is None:
            mask = ~np.isnan(values)
        mask = np.asarray(mask, dtype=bool)
        if values.shape != mask.shape or values.ndim != 2:
            raise DimensionMismatch("values and mask must be matching N x R arrays")
        values = np.where(mask, values, 0.0)
        if np.any((values < 0) | (values > 1)):
            raise ValueOutOfRange("annotation values must lie in [0, 1]")
        return cls(_frozen(values, float), _frozen(mask, bool), class_id)

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_experts(self) -> int:
        return self.values.shape[1]

    @property
    def n_entries(self) -> int:
        return int(self.mask.sum())

    def samples_of(self, expert: int) -> np.ndarray:
        return np.flatnonzero(self.mask[:, expert])

    def experts_of(self, sample: int) -> np.ndarray:
        return np.flatnonzero(self.mask[sample])


@dataclass(frozen=True)
class AnnotationSet:
    """Sparse (sample, expert, class, value) entries with value in [0, 1]."""

    sample: np.ndarray
    expert: np.ndarray
    klass: np.ndarray
    value: np.ndarray
    n_samples: int
    n_experts: int
    n_classes: int
    expert_ids: tuple = ()
    soft: bool = field(init=False, default=False)

    def __post_init__(self):
        arrays = [np.asarray(a).ravel() for a in (self.sample, self.expert, self.klass, self.value)]
        if len({a.shape[0] for a in arrays}) != 1:
            raise DimensionMismatch("entry columns must have equal length")
        s, e, k, v = arrays
        for name, col, bound in (
            ("sample", s, self.n_samples),
            ("expert", e, self.n_experts),
            ("class", k, self.n_classes),
        ):
            if col.size and (col.min() < 0 or col.max() >= bound):
                raise IndexOutOfBounds(f"{name} index outside [0, {bound})")
        v = v.astype(float)
        if v.size and (not np.all(np.isfinite(v)) or v.min() < 0 or v.max() > 1):
            raise ValueOutOfRange("annotation values must lie in [0, 1]")
        # canonical ordering makes equality and serialization order-free
        order = np.lexsort((k, e, s))
        s, e, k, v = s[order], e[order], k[order], v[order]
        if s.size > 1:
            same = (np.diff(s) == 0) & (np.diff(e) == 0) & (np.diff(k) == 0)
            if same.any():
                i = int(np.flatnonzero(same)[0])
                raise DuplicateEntry(
                    f"duplicate entry for sample={s[i]}, expert={e[i]}, class={k[i]}"
                )
        object.__setattr__(self, "sample", _frozen(s, np.int64))
        object.__setattr__(self, "expert", _frozen(e, np.int64))
        object.__setattr__(self, "klass", _frozen(k, np.int64))
        object.__setattr__(self, "value", _frozen(v, float))
        ids = tuple(str(x) for x in self.expert_ids) or tuple(str(j) for j in range(self.n_experts))
        if len(ids) != self.n_experts:
            raise DimensionMismatch("expert_ids length differs from n_experts")
        object.__setattr__(self, "expert_ids", ids)
        object.__setattr__(self, "soft", bool(np.any((v != 0) & (v != 1))))

    def __len__(self) -> int:
        return int(self.sample.shape[0])

    def __eq__(self, other) -> bool:
        if not isinstance(other, AnnotationSet):
            return NotImplemented
        return (
            (self.n_samples, self.n_experts, self.n_classes, self.expert_ids)
            == (other.n_samples, other.n_experts, other.n_classes, other.expert_ids)
            and np.array_equal(self.sample, other.sample)
            and np.array_equal(self.expert, other.expert)
            and np.array_equal(self.klass, other.klass)
            and np.array_equal(self.value, other.value)
        )

    __hash__ = None

    def pair_matrix(self) -> np.ndarray:
        """N x R boolean matrix, True where the expert gave any entry for the sample."""
        m = np.zeros((self.n_samples, self.n_experts), dtype=bool)
        m[self.sample, self.expert] = True
        return m

    def samples_of(self, expert: int) -> np.ndarray:
        """S^j: samples annotated by ``expert``."""
        return np.unique(self.sample[self.expert == expert])

    def experts_of(self, sample: int) -> np.ndarray:
        """E_i: experts who annotated ``sample``."""
        return np.unique(self.expert[self.sample == sample])

    def annotated_mask(self) -> np.ndarray:
        m = np.zeros(self.n_samples, dtype=bool)
        m[self.sample] = True
        return m

    def records(self) -> list:
        return list(
            zip(self.sample.tolist(), self.expert.tolist(), self.klass.tolist(), self.value.tolist())
        )


def build_annotation_set(
    records: Iterable[Sequence], dims: tuple, expert_ids: Sequence[str] = ()
) -> AnnotationSet:
    """Build an :class:`AnnotationSet` from ``(sample, expert, class, value)`` tuples.

    ``dims`` is ``(N, R, K)``.  Repeated triples raise :class:`DuplicateEntry`.
    """
    n, r, k = dims
    rows = [tuple(rec) for rec in records]
    for rec in rows:
        if len(rec) != 4:
            raise DimensionMismatch(f"record {rec!r} is not a 4-tuple")
        for idx in rec[:3]:
            if int(idx) != idx:
                raise IndexOutOfBounds(f"non-integer index in {rec!r}")
    if rows:
        s, e, c, v = (np.array(col) for col in zip(*rows))
    else:
        s = e = c = np.zeros(0, dtype=np.int64)
        v = np.zeros(0)
    return AnnotationSet(
        sample=s.astype(np.int64),
        expert=e.astype(np.int64),
        klass=c.astype(np.int64),
        value=v.astype(float),
        n_samples=n,
        n_experts=r,
        n_classes=k,
        expert_ids=tuple(expert_ids),
    )


def annotations_from_dense(values: np.ndarray, mask: np.ndarray, expert_ids=()) -> AnnotationSet:
    """Build an annotation set from N x R x K ``values`` and an N x R x K ``mask``."""
    values = np.asarray(values, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    if values.shape != mask.shape or values.ndim != 3:
        raise DimensionMismatch("values and mask must be matching N x R x K arrays")
    s, e, c = np.nonzero(mask)
    n, r, k = values.shape
    return AnnotationSet(s, e, c, values[s, e, c], n, r, k, tuple(expert_ids))


def one_hot_expand(labels, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise IndexOutOfBounds("label outside range(n_classes)")
    out = np.zeros((labels.shape[0], n_classes), dtype=np.int64)
    out[np.arange(labels.shape[0]), labels] = 1
    return out


def restrict(annotations: AnnotationSet, class_id: int) -> BinaryTask:
    """Binary one-vs-rest view of ``annotations`` for a single class."""
    if not 0 <= class_id < annotations.n_classes:
        raise IndexOutOfBounds(f"class {class_id} outside [0, {annotations.n_classes})")
    sel = annotations.klass == class_id
    values = np.zeros((annotations.n_samples, annotations.n_experts))
    mask = np.zeros_like(values, dtype=bool)
    values[annotations.sample[sel], annotations.expert[sel]] = annotations.value[sel]
    mask[annotations.sample[sel], annotations.expert[sel]] = True
    return BinaryTask(_frozen(values, float), _frozen(mask, bool), class_id)


def clamp_reliability(x, eps: float = RELIABILITY_EPS) -> np.ndarray:
    return np.clip(x, eps, 1.0 - eps)


@dataclass(frozen=True)
class ExpertReliability:
    """Per-expert, per-class sensitivity ``alpha`` and specificity ``beta`` (R x K)."""

    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.alpha, dtype=float))
        b = np.atleast_2d(np.asarray(self.beta, dtype=float))
        if a.shape != b.shape:
            raise DimensionMismatch("alpha and beta shapes differ")
        if np.any((a < 0) | (a > 1)) or np.any((b < 0) | (b > 1)):
            raise ValueOutOfRange("reliabilities must lie in [0, 1]")
        object.__setattr__(self, "alpha", _frozen(a, float))
        object.__setattr__(self, "beta", _frozen(b, float))

    @property
    def n_experts(self) -> int:
        return self.alpha.shape[0]

    def head(self, n: int) -> "ExpertReliability":
        return ExpertReliability(self.alpha[:n], self.beta[:n])


@dataclass(frozen=True)
class ConsensusOutput:
    """Per-sample, per-class posteriors from a consensus method.

    Per-class columns come from independent one-vs-rest runs and are not
    renormalized across classes.
    """

    posterior: np.ndarray
    reliability: Optional[ExpertReliability] = None
    prior: Optional[np.ndarray] = None
    iterations: tuple = ()
    converged: tuple = ()
    log_likelihood_trace: tuple = ()

    def __post_init__(self):
        p = np.asarray(self.posterior, dtype=float)
        if p.ndim != 2:
            raise DimensionMismatch("posterior must be N x K")
        if np.any((p < 0) | (p > 1)) or not np.all(np.isfinite(p)):
            raise ValueOutOfRange("posterior entries must lie in [0, 1]")
        object.__setattr__(self, "posterior", _frozen(p, float))
        if self.prior is not None:
            object.__setattr__(self, "prior", _frozen(self.prior, float))
