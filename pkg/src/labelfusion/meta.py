"""Model-augmented consensus: inferred and simulated consensus, plus vote shares.

Both meta-algorithms train one classifier per (expert, class) on the samples
the expert labeled.  Inferred consensus replaces every expert by its model's
predictions on the whole pool.  Simulated consensus keeps the human labels and
adds a twin annotator per expert that only speaks on samples the expert did
not label, giving 2R annotators in total.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from labelfusion.core import AnnotationSet, BinaryTask, ConsensusOutput, Dataset, restrict
from labelfusion.em import EmConfig, run_em_tasks
from labelfusion.errors import DimensionMismatch, EmptyAnnotations
from labelfusion.experts import ClassifierSpec, predict_proba, train_expert_model


@dataclass(frozen=True)
class MetaConfig:
    classifier_spec: ClassifierSpec = field(default_factory=ClassifierSpec)
    em_config: EmConfig = field(default_factory=EmConfig)
    minimum_training_size: int = 5

    def effective_spec(self) -> ClassifierSpec:
        return dataclasses.replace(self.classifier_spec, minimum_training_size=self.minimum_training_size)


def majority_voting(annotations: AnnotationSet) -> ConsensusOutput:
    """Per-class share of positive votes; 0.5 where nobody voted."""
    if len(annotations) == 0:
        raise EmptyAnnotations("no annotation entries at all")
    n, k = annotations.n_samples, annotations.n_classes
    total = np.zeros((n, k))
    count = np.zeros((n, k))
    np.add.at(total, (annotations.sample, annotations.klass), annotations.value)
    np.add.at(count, (annotations.sample, annotations.klass), 1.0)
    post = np.full((n, k), 0.5)
    np.divide(total, count, out=post, where=count > 0)
    return ConsensusOutput(posterior=post)


def _check(dataset: Dataset, annotations: AnnotationSet):
    if dataset.n_samples != annotations.n_samples:
        raise DimensionMismatch(
            f"dataset has {dataset.n_samples} samples, annotations {annotations.n_samples}"
        )
    if dataset.n_classes != annotations.n_classes:
        raise DimensionMismatch("dataset and annotations disagree on n_classes")


def expert_predictions(dataset: Dataset, task: BinaryTask, spec: ClassifierSpec) -> np.ndarray:
    """N x R matrix of f^j(x_i) for every expert; 0.5 columns for experts with no data."""
    X = dataset.features
    out = np.full((task.n_samples, task.n_experts), 0.5)
    for j in range(task.n_experts):
        idx = task.samples_of(j)
        if idx.size == 0:
            continue
        model = train_expert_model(X[idx], task.values[idx, j], spec, sample_index=idx)
        out[:, j] = predict_proba(model, X)
    return out


def inferred_tasks(dataset: Dataset, annotations: AnnotationSet, config: MetaConfig):
    spec = config.effective_spec()
    tasks = []
    for c in range(annotations.n_classes):
        pred = expert_predictions(dataset, restrict(annotations, c), spec)
        tasks.append(BinaryTask.from_dense(pred, np.ones_like(pred, dtype=bool), class_id=c))
    return tasks


def simulated_tasks(dataset: Dataset, annotations: AnnotationSet, config: MetaConfig):
    spec = config.effective_spec()
    tasks = []
    for c in range(annotations.n_classes):
        human = restrict(annotations, c)
        pred = expert_predictions(dataset, human, spec)
        # the twin speaks exactly where the human is silent
        twin_mask = ~human.mask
        values = np.hstack([human.values, np.where(twin_mask, pred, 0.0)])
        mask = np.hstack([human.mask, twin_mask])
        tasks.append(BinaryTask.from_dense(values, mask, class_id=c))
    return tasks


def inferred_consensus(dataset: Dataset, annotations: AnnotationSet, config: MetaConfig = MetaConfig()) -> ConsensusOutput:
    """EM over dense soft predictions of per-expert models; human labels are not passed to EM."""
    _check(dataset, annotations)
    return run_em_tasks(inferred_tasks(dataset, annotations, config), config.em_config)


def simulated_consensus(dataset: Dataset, annotations: AnnotationSet, config: MetaConfig = MetaConfig()) -> ConsensusOutput:
    """EM over R human annotators plus R simulated twins.

    Reliability rows ``0..R-1`` belong to the humans, ``R..2R-1`` to their twins.
    """
    _check(dataset, annotations)
    return run_em_tasks(simulated_tasks(dataset, annotations, config), config.em_config)
