"""End-to-end evaluation pipeline.

For every seed: simulate annotators on the training pool, run each consensus
method, threshold its posteriors with each cut-off, train a downstream model
on the resulting labels and score it on the test split.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import os
from dataclasses import dataclass, field
from itertools import permutations
from typing import Optional

import numpy as np

from labelfusion.core import Dataset, one_hot_expand
from labelfusion.data import (
    ensure_dir,
    load_dataset_csv,
    load_presplit,
    stratified_split,
    write_matrix_csv,
)
from labelfusion.em import EmConfig, run_em
from labelfusion.errors import AllZeroDifferences, ConfigError, DegenerateInput, LabelFusionError
from labelfusion.experts import ClassifierSpec, predict_proba, train_expert_model
from labelfusion.meta import MetaConfig, inferred_consensus, majority_voting, simulated_consensus
from labelfusion.metrics import (
    balanced_accuracy,
    pearson,
    reliability_mae,
    roc_auc_macro,
    spearman,
    wilcoxon_one_sided,
)
from labelfusion.simulation import SimConfig, generate_annotations, hidden_matrix, sample_expert_profiles
from labelfusion.thresholds import (
    assign_multilabel,
    assign_single_label,
    default_thresholds,
    gt_prior_thresholds,
    model_posterior_thresholds,
)

log = logging.getLogger(__name__)

METHODS = ("simulated", "inferred", "em", "majority_voting")
CUTOFFS = ("default", "gt_prior", "model_posterior")
DENSE_METHODS = ("simulated", "inferred", "em")
OUTPUT_DIR_ENV = "LABELFUSION_OUTPUT_DIR"
DEFAULT_SEEDS = (0, 1, 2, 3, 4)

METHOD_TITLES = {
    "simulated": "Simulated consensus",
    "inferred": "Inferred consensus",
    "em": "EM",
    "majority_voting": "Majority Voting",
}
CUTOFF_TITLES = {"default": "default", "gt_prior": "GT-prior", "model_posterior": "model-posterior"}


@dataclass(frozen=True)
class ExperimentConfig:
    dataset_path: Optional[str] = None
    label_column_name: str = "label"
    # {"stratified_fraction": f} or {"presplit_paths": [train_csv, test_csv]}
    test_split: dict = field(default_factory=lambda: {"stratified_fraction": 0.4})
    sim: SimConfig = field(default_factory=SimConfig)
    methods: tuple = METHODS
    cutoffs: tuple = CUTOFFS
    seeds: tuple = DEFAULT_SEEDS
    classifier_spec: ClassifierSpec = field(default_factory=ClassifierSpec)
    em_config: EmConfig = field(default_factory=EmConfig)
    output_dir: str = "results"
    split_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "cutoffs", tuple(self.cutoffs))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if not self.methods:
            raise ConfigError("at least one method is required")
        if not self.cutoffs:
            raise ConfigError("at least one cut-off is required")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        bad = set(self.methods) - set(METHODS)
        if bad:
            raise ConfigError(f"unknown methods {sorted(bad)}")
        bad = set(self.cutoffs) - set(CUTOFFS)
        if bad:
            raise ConfigError(f"unknown cut-offs {sorted(bad)}")
        split = self.test_split
        if set(split) == {"stratified_fraction"}:
            if not 0 < float(split["stratified_fraction"]) < 1:
                raise ConfigError("stratified_fraction must lie in (0, 1)")
        elif set(split) == {"presplit_paths"}:
            if len(split["presplit_paths"]) != 2:
                raise ConfigError("presplit_paths must be [train, test]")
        else:
            raise ConfigError("test_split needs exactly one of stratified_fraction / presplit_paths")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for k in ("methods", "cutoffs", "seeds"):
            d[k] = list(d[k])
        d["sim"]["participation_beta"] = list(d["sim"]["participation_beta"])
        d["sim"]["reliability_beta"] = list(d["sim"]["reliability_beta"])
        return json.loads(json.dumps(d))

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config fields {sorted(unknown)}")
        d = dict(d)
        try:
            if "sim" in d:
                d["sim"] = SimConfig(**d["sim"])
            if "classifier_spec" in d:
                d["classifier_spec"] = ClassifierSpec(**d["classifier_spec"])
            if "em_config" in d:
                d["em_config"] = EmConfig(**d["em_config"])
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from None
        cfg = cls.from_dict(raw)
        env = os.environ.get(OUTPUT_DIR_ENV)
        if env:
            cfg = dataclasses.replace(cfg, output_dir=env)
        return cfg


@dataclass
class ExperimentReport:
    config: dict
    dataset: dict
    annotation_quality: list
    expert_estimation: list
    model_quality: list
    aggregates: dict
    wilcoxon: dict
    # bulky per-cell arrays for write_report; not part of report.json
    artifacts: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def failures(self) -> list:
        cells = self.annotation_quality + self.expert_estimation + self.model_quality
        return [c for c in cells if c.get("error")]

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "dataset": self.dataset,
            "annotation_quality": self.annotation_quality,
            "expert_estimation": self.expert_estimation,
            "model_quality": self.model_quality,
            "aggregates": self.aggregates,
            "wilcoxon": self.wilcoxon,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k != "artifacts"})

    @classmethod
    def from_json(cls, text: str) -> "ExperimentReport":
        return cls.from_dict(json.loads(text))


def _num(x) -> Optional[float]:
    if x is None:
        return None
    x = float(x)
    return x if np.isfinite(x) else None


def _err(exc: Exception) -> str:
    return f"{type(exc).__name__}: {exc}"


def load_splits(config: ExperimentConfig):
    split = config.test_split
    if "presplit_paths" in split:
        train_path, test_path = split["presplit_paths"]
        return load_presplit(train_path, test_path, config.label_column_name)
    if config.dataset_path is None:
        raise ConfigError("dataset_path is required with a stratified split")
    full = load_dataset_csv(config.dataset_path, config.label_column_name)
    return stratified_split(full, float(split["stratified_fraction"]), config.split_seed)


def run_consensus(method: str, dataset: Dataset, annotations, meta: MetaConfig):
    if method == "majority_voting":
        return majority_voting(annotations)
    if method == "em":
        return run_em(annotations, meta.em_config)
    if method == "inferred":
        return inferred_consensus(dataset, annotations, meta)
    if method == "simulated":
        return simulated_consensus(dataset, annotations, meta)
    raise ConfigError(f"unknown method {method!r}")


def label_thresholds(cutoff: str, posterior, pool_labels, k: int):
    """(multi-label thresholds, single-label thresholds) for a pool posterior."""
    if cutoff == "default":
        return default_thresholds(k), default_thresholds(k, single_label=True)
    if cutoff == "gt_prior":
        t = gt_prior_thresholds(pool_labels, k)
        return t, t
    t = model_posterior_thresholds(posterior)
    return t, t


def train_downstream(features, labels, spec: ClassifierSpec):
    """One binary model per class on multi-label hard labels."""
    return [train_expert_model(features, labels[:, c], spec) for c in range(labels.shape[1])]


def predict_downstream(models, features) -> np.ndarray:
    return np.column_stack([predict_proba(m, features) for m in models])


def _expert_cell(seed, method, out, hidden_a, hidden_b, n_experts):
    cell = {"seed": seed, "method": method, "mae": None, "pearson": None, "spearman": None,
            "beta_mae": None, "error": None}
    if out is None or out.reliability is None:
        return cell
    human = out.reliability.head(n_experts)
    cell["mae"] = _num(reliability_mae(human.alpha, hidden_a))
    cell["beta_mae"] = _num(reliability_mae(human.beta, hidden_b))
    for name, fn in (("pearson", pearson), ("spearman", spearman)):
        try:
            cell[name] = _num(fn(human.alpha.ravel(), hidden_a.ravel()))
        except DegenerateInput:
            cell[name] = None
    return cell


def run_seed(seed: int, train: Dataset, test: Dataset, config: ExperimentConfig):
    """All cells for one seed: (annotation rows, expert rows, model rows, artifacts)."""
    k = train.n_classes
    meta = MetaConfig(classifier_spec=config.classifier_spec, em_config=config.em_config,
                      minimum_training_size=config.classifier_spec.minimum_training_size)
    sim = dataclasses.replace(config.sim, seed=seed)
    profiles = sample_expert_profiles(sim, k)
    expert_ids = tuple(f"expert_{j:02d}" for j in range(sim.n_experts))
    annotations = generate_annotations(one_hot_expand(train.true_labels, k), profiles, seed, expert_ids)
    annotated = annotations.annotated_mask()
    hidden_a, hidden_b = hidden_matrix(profiles, "alpha"), hidden_matrix(profiles, "beta")
    y_pool = train.true_labels
    ann_rows, exp_rows, mod_rows = [], [], []
    artifacts = {"annotations": annotations, "profiles": profiles, "posteriors": {}, "labels": {}}

    for method in config.methods:
        log.info("seed %d: running %s", seed, method)
        out, error = None, None
        try:
            out = run_consensus(method, train, annotations, meta)
        except Exception as exc:  # recorded per cell, run continues
            error = _err(exc)
        exp_cell = _expert_cell(seed, method, out, hidden_a, hidden_b, sim.n_experts)
        exp_cell["error"] = error
        exp_rows.append(exp_cell)

        auc = None
        if out is not None:
            artifacts["posteriors"][method] = out.posterior
            try:
                auc = _num(roc_auc_macro(out.posterior[annotated], y_pool[annotated]))
            except LabelFusionError as exc:
                error = _err(exc)

        for cutoff in config.cutoffs:
            ann = {"seed": seed, "method": method, "cutoff": cutoff, "auc": auc, "bac": None,
                   "thresholds": None, "n_annotated": int(annotated.sum()), "error": error}
            mod = {"seed": seed, "method": method, "cutoff": cutoff, "bac": None,
                   "thresholds": None, "n_train": None, "error": error}
            ann_rows.append(ann)
            mod_rows.append(mod)
            if out is None:
                continue
            try:
                t_multi, t_single = label_thresholds(cutoff, out.posterior, y_pool, k)
                ann["thresholds"] = [float(x) for x in t_multi.t]
                pred = assign_single_label(out.posterior[annotated], t_single)
                ann["bac"] = _num(balanced_accuracy(pred, y_pool[annotated], k))
            except Exception as exc:
                ann["error"] = _err(exc)
                mod["error"] = ann["error"]
                continue
            try:
                labels = assign_multilabel(out.posterior, t_multi)
                artifacts["labels"][(method, cutoff)] = labels
                rows = np.arange(train.n_samples) if method in DENSE_METHODS else np.flatnonzero(annotated)
                models = train_downstream(train.features[rows], labels[rows], config.classifier_spec)
                test_pred = predict_downstream(models, test.features)
                if cutoff == "model_posterior":
                    t_test = model_posterior_thresholds(predict_downstream(models, train.features))
                elif cutoff == "gt_prior":
                    t_test = t_single
                else:
                    t_test = default_thresholds(k, single_label=True)
                mod["thresholds"] = [float(x) for x in t_test.t]
                mod["n_train"] = int(rows.size)
                mod["bac"] = _num(balanced_accuracy(assign_single_label(test_pred, t_test), test.true_labels, k))
            except Exception as exc:
                mod["error"] = _err(exc)
    return ann_rows, exp_rows, mod_rows, artifacts


def _metric_series(report_rows, key, method, cutoff=None):
    out = {}
    for row in report_rows:
        if row["method"] != method or (cutoff is not None and row.get("cutoff") != cutoff):
            continue
        out[row["seed"]] = row[key]
    return out


def metric_table(ann_rows, exp_rows, mod_rows, methods, cutoffs):
    """{metric_name: {method: {seed: value}}} for every reported metric."""
    table = {}
    first = cutoffs[0]
    table["auc"] = {m: _metric_series(ann_rows, "auc", m, first) for m in methods}
    for c in cutoffs:
        table[f"bac_{c}"] = {m: _metric_series(ann_rows, "bac", m, c) for m in methods}
    for key in ("mae", "pearson", "spearman", "beta_mae"):
        table[key] = {m: _metric_series(exp_rows, key, m) for m in methods}
    for c in cutoffs:
        table[f"model_bac_{c}"] = {m: _metric_series(mod_rows, "bac", m, c) for m in methods}
    return table


def aggregate(table, seeds):
    """Mean and sample standard deviation over seeds with a defined value."""
    agg = {}
    for metric, per_method in table.items():
        for method, series in per_method.items():
            vals = np.array([series[s] for s in seeds if series.get(s) is not None], dtype=float)
            entry = {"mean": None, "std": None, "n": int(vals.size)}
            if vals.size:
                entry["mean"] = _num(vals.mean())
                entry["std"] = _num(vals.std(ddof=1) if vals.size > 1 else 0.0)
            agg.setdefault(method, {})[metric] = entry
    return agg


def pairwise_wilcoxon(table, seeds):
    """One-sided p-values for "a > b" over seeds where both methods have values."""
    out = {}
    for metric, per_method in table.items():
        cell = {}
        for a, b in permutations(per_method, 2):
            common = [s for s in seeds if per_method[a].get(s) is not None and per_method[b].get(s) is not None]
            if not common:
                continue
            try:
                p = wilcoxon_one_sided([per_method[a][s] for s in common], [per_method[b][s] for s in common])
            except AllZeroDifferences:
                p = None
            cell[f"{a}>{b}"] = _num(p)
        if cell:
            out[metric] = cell
    return out


def run_experiment(config: ExperimentConfig, train: Optional[Dataset] = None, test: Optional[Dataset] = None) -> ExperimentReport:
    """Run every (seed, method, cut-off) cell.

    ``train``/``test`` may be passed directly; otherwise they are loaded from
    the config.  Component errors are recorded in the affected cells.
    """
    if train is None or test is None:
        train, test = load_splits(config)
    if train.true_labels is None or test.true_labels is None:
        raise ConfigError("the experiment needs ground-truth labels on both splits")
    ann_rows, exp_rows, mod_rows = [], [], []
    artifacts = {"train_ids": train.sample_ids, "seeds": {}}
    for seed in config.seeds:
        a, e, m, art = run_seed(seed, train, test, config)
        ann_rows += a
        exp_rows += e
        mod_rows += m
        artifacts["seeds"][seed] = art
    table = metric_table(ann_rows, exp_rows, mod_rows, config.methods, config.cutoffs)
    return ExperimentReport(
        config=config.to_dict(),
        dataset={
            "n_train": train.n_samples,
            "n_test": test.n_samples,
            "n_classes": train.n_classes,
            "class_names": list(train.class_names),
            "name": os.path.basename(config.dataset_path) if config.dataset_path else "in-memory",
        },
        annotation_quality=ann_rows,
        expert_estimation=exp_rows,
        model_quality=mod_rows,
        aggregates=aggregate(table, config.seeds),
        wilcoxon=pairwise_wilcoxon(table, config.seeds),
        artifacts=artifacts,
    )


def _cell(entry, best) -> str:
    if entry is None or entry["mean"] is None:
        return "NA"
    text = f"{entry['mean']:.3f} (± {entry['std']:.3f})"
    return f"**{text}**" if best else text


def _table(report, title, columns, lower_is_better=()):
    methods = report.config["methods"]
    agg = report.aggregates
    lines = [f"### {title}", "", "| Method | " + " | ".join(h for h, _ in columns) + " |",
             "|---" * (len(columns) + 1) + "|"]
    best = {}
    for _, key in columns:
        vals = [(agg[m][key]["mean"], m) for m in methods if agg[m][key]["mean"] is not None]
        if vals:
            pick = min(vals) if key in lower_is_better else max(vals)
            best[key] = pick[0]
    for m in methods:
        cells = [_cell(agg[m][key], agg[m][key]["mean"] is not None and agg[m][key]["mean"] == best.get(key))
                 for _, key in columns]
        lines.append(f"| {METHOD_TITLES[m]} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def render_tables(report: ExperimentReport) -> str:
    cutoffs = report.config["cutoffs"]
    name = report.dataset.get("name", "dataset")
    parts = [f"## {name}\n"]
    parts.append(_table(report, "Annotation quality",
                        [("AUC", "auc")] + [(f"BAC-{CUTOFF_TITLES[c]}", f"bac_{c}") for c in cutoffs]))
    parts.append(_table(report, "Expert quality estimation",
                        [("MAE", "mae"), ("Pearson", "pearson"), ("Spearman", "spearman")],
                        lower_is_better=("mae",)))
    parts.append(_table(report, "Model quality (test set)",
                        [(f"BAC-{CUTOFF_TITLES[c]}", f"model_bac_{c}") for c in cutoffs]))
    return "\n".join(parts)


def write_report(report: ExperimentReport, output_dir) -> list:
    """Write report.json, tables.md and per-cell posterior/label CSVs."""
    ensure_dir(output_dir)
    written = []
    path = os.path.join(output_dir, "report.json")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
    written.append(path)
    path = os.path.join(output_dir, "tables.md")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(render_tables(report))
    written.append(path)
    ids = report.artifacts.get("train_ids")
    for seed, art in report.artifacts.get("seeds", {}).items():
        post_dir = ensure_dir(os.path.join(output_dir, "posteriors"))
        label_dir = ensure_dir(os.path.join(output_dir, "labels"))
        for method, post in art["posteriors"].items():
            path = os.path.join(post_dir, f"{seed}_{method}.csv")
            write_matrix_csv(post, path, ids)
            written.append(path)
        for (method, cutoff), labels in art["labels"].items():
            path = os.path.join(label_dir, f"{seed}_{method}_{cutoff}.csv")
            write_matrix_csv(labels, path, ids)
            written.append(path)
    return written
