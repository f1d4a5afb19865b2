"""CSV ingestion/emission, min-max scaling, stratified splits and toy datasets.

File formats (UTF-8, ``.`` decimal separator):

* dataset:     header, numeric feature columns, optional label column
* annotations: ``sample_id,expert_id,class_id,value``
* posteriors:  ``sample_id,class_0,...,class_{K-1}``
"""

from __future__ import annotations

import csv
import os
from typing import Optional, Sequence

import numpy as np

from labelfusion.core import AnnotationSet, Dataset, build_annotation_set
from labelfusion.errors import (
    ClassTooSmall,
    DimensionMismatch,
    EmptyFile,
    IndexOutOfBounds,
    MissingColumn,
    NonNumericFeature,
    ValueOutOfRange,
)
from labelfusion.simulation import expert_rng

ANNOTATION_HEADER = ("sample_id", "expert_id", "class_id", "value")
_SPLIT_STREAM = 2


def _fmt(x: float) -> str:
    # repr round-trips float64 exactly
    return repr(float(x))


def read_table(path, label_column: Optional[str] = None):
    """Raw numeric features, raw label strings (or None) and feature names."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or not rows[0]:
        raise EmptyFile(f"{path} is empty")
    header, body = rows[0], [r for r in rows[1:] if r]
    if not body:
        raise EmptyFile(f"{path} has a header but no rows")
    label_idx = None
    if label_column is not None:
        if label_column not in header:
            raise MissingColumn(f"label column {label_column!r} not in {path}")
        label_idx = header.index(label_column)
    feat_idx = [i for i in range(len(header)) if i != label_idx]
    feats = np.empty((len(body), len(feat_idx)))
    for r, row in enumerate(body):
        if len(row) != len(header):
            raise DimensionMismatch(f"row {r + 2} of {path} has {len(row)} fields, header {len(header)}")
        for c, i in enumerate(feat_idx):
            try:
                feats[r, c] = float(row[i])
            except ValueError:
                raise NonNumericFeature(f"column {header[i]!r}, row {r + 2}: {row[i]!r}") from None
    if not np.all(np.isfinite(feats)):
        raise NonNumericFeature(f"{path} contains non-finite feature values")
    labels = None if label_idx is None else [row[label_idx] for row in body]
    return feats, labels, [header[i] for i in feat_idx]


def minmax_scale(features, lo=None, hi=None) -> np.ndarray:
    """Scale columns to [0, 1]; constant columns map to 0."""
    x = np.asarray(features, dtype=float)
    lo = x.min(axis=0) if lo is None else np.asarray(lo)
    hi = x.max(axis=0) if hi is None else np.asarray(hi)
    span = hi - lo
    out = np.zeros_like(x)
    np.divide(x - lo, span, out=out, where=span > 0)
    return out


def encode_labels(raw: Sequence[str], classes: Optional[list] = None):
    """Dense indices in first-occurrence order; ``classes`` is extended in place."""
    classes = [] if classes is None else classes
    lookup = {c: i for i, c in enumerate(classes)}
    out = np.empty(len(raw), dtype=np.int64)
    for i, v in enumerate(raw):
        if v not in lookup:
            lookup[v] = len(classes)
            classes.append(v)
        out[i] = lookup[v]
    return out, classes


def load_dataset_csv(path, label_column_name: Optional[str] = None, n_classes: Optional[int] = None) -> Dataset:
    feats, raw, _ = read_table(path, label_column_name)
    return _assemble(minmax_scale(feats), raw, n_classes, id_offset=0)


def _assemble(features, raw_labels, n_classes, id_offset, classes=None, prefix=""):
    n = features.shape[0]
    ids = tuple(f"{prefix}{i + id_offset}" for i in range(n))
    if raw_labels is None:
        return Dataset(features, n_classes or 2, None, ids)
    y, classes = encode_labels(raw_labels, classes)
    k = max(n_classes or 0, len(classes), 2)
    return Dataset(features, k, y, ids, tuple(classes) + tuple(str(i) for i in range(len(classes), k)))


def load_presplit(train_path, test_path, label_column_name: str):
    """Train/test files scaled jointly with a shared label mapping."""
    f_tr, y_tr, h_tr = read_table(train_path, label_column_name)
    f_te, y_te, h_te = read_table(test_path, label_column_name)
    if h_tr != h_te:
        raise DimensionMismatch("train and test feature columns differ")
    both = np.vstack([f_tr, f_te])
    lo, hi = both.min(axis=0), both.max(axis=0)
    classes: list = []
    _, classes = encode_labels(y_tr + y_te, classes)
    k = max(len(classes), 2)
    train = _assemble(minmax_scale(f_tr, lo, hi), y_tr, k, 0, list(classes), prefix="train_")
    test = _assemble(minmax_scale(f_te, lo, hi), y_te, k, 0, list(classes), prefix="test_")
    return train, test


def write_dataset_csv(dataset: Dataset, path, label_column_name: str = "label"):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        d = dataset.features.shape[1]
        header = [f"x{i}" for i in range(d)]
        if dataset.true_labels is not None:
            header.append(label_column_name)
        w.writerow(header)
        for i in range(dataset.n_samples):
            row = [_fmt(v) for v in dataset.features[i]]
            if dataset.true_labels is not None:
                row.append(dataset.class_names[dataset.true_labels[i]])
            w.writerow(row)


def stratified_split(dataset: Dataset, fraction: float, seed: int):
    """Per class, ``round(fraction * count)`` samples go to the test set."""
    if dataset.true_labels is None:
        raise MissingColumn("stratified split needs true labels")
    if not 0 < fraction < 1:
        raise ValueOutOfRange("fraction must lie in (0, 1)")
    y = dataset.true_labels
    rng = expert_rng(seed, _SPLIT_STREAM, 0)
    test_idx = []
    for c in range(dataset.n_classes):
        members = np.flatnonzero(y == c)
        if members.size == 0:
            continue
        if members.size < 2:
            raise ClassTooSmall(f"class {dataset.class_names[c]!r} has fewer than 2 samples")
        n_test = int(round(fraction * members.size))
        test_idx.append(rng.permutation(members)[:n_test])
    test = np.sort(np.concatenate(test_idx)) if test_idx else np.zeros(0, dtype=np.int64)
    train = np.setdiff1d(np.arange(dataset.n_samples), test)
    return dataset.subset(train), dataset.subset(test)


def write_annotations_csv(annotations: AnnotationSet, path, sample_ids: Sequence[str]):
    if len(sample_ids) != annotations.n_samples:
        raise DimensionMismatch("sample_ids length differs from annotation N")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ANNOTATION_HEADER)
        for s, e, c, v in annotations.records():
            w.writerow([sample_ids[s], annotations.expert_ids[e], c, _fmt(v)])


def read_annotations_csv(path, sample_ids: Sequence[str], n_classes: int, expert_ids: Optional[Sequence[str]] = None) -> AnnotationSet:
    """Read annotations, mapping opaque ids back to dense indices.

    Without ``expert_ids``, experts are indexed in first-occurrence order, so
    experts that labeled nothing are invisible; pass the id list to keep them.
    """
    sample_lookup = {s: i for i, s in enumerate(sample_ids)}
    experts = list(expert_ids) if expert_ids is not None else []
    expert_lookup = {e: i for i, e in enumerate(experts)}
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyFile(f"{path} is empty")
        if tuple(h.strip() for h in header) != ANNOTATION_HEADER:
            raise MissingColumn(f"annotation header must be {','.join(ANNOTATION_HEADER)}")
        for row in reader:
            if not row:
                continue
            sid, eid, cid, val = row
            if sid not in sample_lookup:
                raise IndexOutOfBounds(f"unknown sample id {sid!r}")
            if eid not in expert_lookup:
                if expert_ids is not None:
                    raise IndexOutOfBounds(f"unknown expert id {eid!r}")
                expert_lookup[eid] = len(experts)
                experts.append(eid)
            records.append((sample_lookup[sid], expert_lookup[eid], int(cid), float(val)))
    return build_annotation_set(records, (len(sample_ids), len(experts), n_classes), experts)


def write_matrix_csv(matrix, path, sample_ids: Sequence[str], prefix: str = "class_"):
    m = np.asarray(matrix)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id"] + [f"{prefix}{c}" for c in range(m.shape[1])])
        as_int = np.issubdtype(m.dtype, np.integer)
        for sid, row in zip(sample_ids, m):
            w.writerow([sid] + [str(int(v)) if as_int else _fmt(v) for v in row])


def read_matrix_csv(path):
    """Return (sample_ids, N x K float matrix) from a posteriors/labels file."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if len(rows) < 2:
        raise EmptyFile(f"{path} has no data rows")
    if rows[0][0] != "sample_id":
        raise MissingColumn(f"{path} must start with a sample_id column")
    ids = [r[0] for r in rows[1:]]
    return ids, np.array([[float(v) for v in r[1:]] for r in rows[1:]])


def make_blobs(n_samples: int, seed: int, positive_fraction: float = 0.5, separation: float = 4.0, n_features: int = 2) -> Dataset:
    """Two isotropic unit-variance Gaussian blobs, min-max scaled.

    Exactly ``round(positive_fraction * n_samples)`` samples are positive.
    """
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))
    n_pos = int(round(positive_fraction * n_samples))
    y = np.zeros(n_samples, dtype=np.int64)
    y[rng.permutation(n_samples)[:n_pos]] = 1
    centers = np.zeros((2, n_features))
    centers[1] = separation / np.sqrt(n_features)
    x = rng.standard_normal((n_samples, n_features)) + centers[y]
    return Dataset(minmax_scale(x), 2, y)


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path
