"""Fusing sparse, noisy expert annotations into probabilistic labels."""

from labelfusion.core import (
    AnnotationSet,
    BinaryTask,
    ConsensusOutput,
    Dataset,
    ExpertReliability,
    build_annotation_set,
    one_hot_expand,
    restrict,
)
from labelfusion.em import EmConfig, e_step, m_step, majority_init, observed_log_likelihood, run_em
from labelfusion.experts import ClassifierSpec, TrainedClassifier, predict_proba, train_expert_model
from labelfusion.meta import MetaConfig, inferred_consensus, majority_voting, simulated_consensus
from labelfusion.simulation import ExpertProfile, SimConfig, generate_annotations, sample_expert_profiles
from labelfusion.thresholds import (
    ThresholdVector,
    assign_multilabel,
    assign_single_label,
    default_thresholds,
    gt_prior_thresholds,
    model_posterior_thresholds,
)

__version__ = "0.1.0"
