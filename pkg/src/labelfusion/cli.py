"""Command-line entry points: simulate, consensus, labels, evaluate, experiment.

Exit codes: 0 on success, 1 on configuration/input errors, 2 when an
experiment finished but some cells failed.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys

import numpy as np

from labelfusion.core import one_hot_expand
from labelfusion.data import (
    load_dataset_csv,
    read_annotations_csv,
    read_matrix_csv,
    write_annotations_csv,
    write_matrix_csv,
)
from labelfusion.em import EmConfig
from labelfusion.errors import ConfigError, DimensionMismatch, LabelFusionError
from labelfusion.experiment import (
    CUTOFFS,
    METHODS,
    OUTPUT_DIR_ENV,
    ExperimentConfig,
    run_consensus,
    run_experiment,
    write_report,
)
from labelfusion.experts import ClassifierSpec
from labelfusion.meta import MetaConfig
from labelfusion.metrics import balanced_accuracy, roc_auc_macro
from labelfusion.simulation import ExpertProfile, SimConfig, generate_annotations, sample_expert_profiles
from labelfusion.thresholds import (
    assign_multilabel,
    assign_single_label,
    default_thresholds,
    gt_prior_thresholds,
    model_posterior_thresholds,
)

log = logging.getLogger("labelfusion")


def _load_profiles(path):
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    return raw["expert_ids"], [ExpertProfile.from_dict(p) for p in raw["profiles"]]


def cmd_simulate(args) -> int:
    ds = load_dataset_csv(args.dataset, args.label_column)
    if ds.true_labels is None:
        raise ConfigError("simulation needs a label column")
    sim = SimConfig(n_experts=args.n_experts, seed=args.seed,
                    participation_beta=tuple(args.participation_beta),
                    reliability_beta=tuple(args.reliability_beta))
    profiles = sample_expert_profiles(sim, ds.n_classes)
    if args.participation is not None:
        profiles = [dataclasses.replace(p, participation=args.participation) for p in profiles]
    expert_ids = [f"expert_{j:02d}" for j in range(sim.n_experts)]
    ann = generate_annotations(one_hot_expand(ds.true_labels, ds.n_classes), profiles, args.seed, expert_ids)
    write_annotations_csv(ann, args.out, ds.sample_ids)
    if args.profiles_out:
        with open(args.profiles_out, "w", encoding="utf-8") as fh:
            json.dump({"seed": args.seed, "expert_ids": expert_ids,
                       "profiles": [p.to_dict() for p in profiles]}, fh, indent=2)
    print(f"wrote {len(ann)} annotations from {sim.n_experts} experts to {args.out}")
    return 0


def cmd_consensus(args) -> int:
    ds = load_dataset_csv(args.dataset, args.label_column)
    expert_ids = _load_profiles(args.profiles)[0] if args.profiles else None
    ann = read_annotations_csv(args.annotations, ds.sample_ids, ds.n_classes, expert_ids)
    spec = ClassifierSpec(max_iterations=args.model_iterations, learning_rate=args.learning_rate)
    meta = MetaConfig(classifier_spec=spec, em_config=EmConfig(max_iterations=args.em_iterations,
                                                               tolerance=args.tolerance))
    out = run_consensus(args.method, ds, ann, meta)
    write_matrix_csv(out.posterior, args.out, ds.sample_ids)
    if args.reliability_out:
        rel = None
        if out.reliability is not None:
            r = ann.n_experts
            ids = list(ann.expert_ids) + [f"{e}_twin" for e in ann.expert_ids][: out.reliability.n_experts - r]
            rel = {
                "expert_ids": ids,
                "alpha": out.reliability.alpha.tolist(),
                "beta": out.reliability.beta.tolist(),
                "iterations": list(out.iterations),
                "converged": list(out.converged),
            }
        with open(args.reliability_out, "w", encoding="utf-8") as fh:
            json.dump({"method": args.method, "reliability": rel}, fh, indent=2)
    print(f"{args.method}: wrote posteriors for {ds.n_samples} samples to {args.out}")
    return 0


def cmd_labels(args) -> int:
    ids, post = read_matrix_csv(args.posteriors)
    k = post.shape[1]
    if args.cutoff == "default":
        t = default_thresholds(k, single_label=args.single_label)
    elif args.cutoff == "gt_prior":
        if not args.dataset:
            raise ConfigError("--cutoff gt_prior needs --dataset with a label column")
        ds = load_dataset_csv(args.dataset, args.label_column, n_classes=k)
        t = gt_prior_thresholds(ds.true_labels, k)
    else:
        t = model_posterior_thresholds(post)
    if args.single_label:
        labels = assign_single_label(post, t)
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("sample_id,label\n")
            for sid, c in zip(ids, labels):
                fh.write(f"{sid},{int(c)}\n")
    else:
        write_matrix_csv(assign_multilabel(post, t), args.out, ids)
    print(json.dumps({"cutoff": args.cutoff, "thresholds": [float(x) for x in t.t]}))
    return 0


def cmd_evaluate(args) -> int:
    ds = load_dataset_csv(args.dataset, args.label_column)
    if ds.true_labels is None:
        raise ConfigError("evaluation needs a label column")
    ids, post = read_matrix_csv(args.posteriors)
    if list(ids) != list(ds.sample_ids):
        raise DimensionMismatch("posterior sample ids do not match the dataset")
    keep = np.ones(ds.n_samples, dtype=bool)
    if args.annotations:
        keep = read_annotations_csv(args.annotations, ds.sample_ids, ds.n_classes).annotated_mask()
    y = ds.true_labels[keep]
    p = post[keep]
    result = {"n_evaluated": int(keep.sum()), "auc": roc_auc_macro(p, y), "bac": {}}
    k = post.shape[1]
    for cutoff in CUTOFFS:
        if cutoff == "default":
            t = default_thresholds(k, single_label=True)
        elif cutoff == "gt_prior":
            t = gt_prior_thresholds(ds.true_labels, k)
        else:
            t = model_posterior_thresholds(post)
        result["bac"][cutoff] = balanced_accuracy(assign_single_label(p, t), y, k)
    print(json.dumps(result, indent=2))
    return 0


def cmd_experiment(args) -> int:
    config = ExperimentConfig.from_json(args.config)
    if args.output_dir:
        config = dataclasses.replace(config, output_dir=args.output_dir)
    report = run_experiment(config)
    write_report(report, config.output_dir)
    failed = report.failures
    print(f"report written to {config.output_dir} ({len(failed)} failed cells)")
    return 2 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="labelfusion", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate noisy expert annotations from true labels")
    s.add_argument("--dataset", required=True)
    s.add_argument("--label-column", default="label")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--n-experts", type=int, default=15)
    s.add_argument("--participation-beta", type=float, nargs=2, default=(1.0, 20.0))
    s.add_argument("--reliability-beta", type=float, nargs=2, default=(4.0, 1.0))
    s.add_argument("--participation", type=float, default=None,
                   help="override every expert's participation rate")
    s.add_argument("--out", required=True)
    s.add_argument("--profiles-out")
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("consensus", help="aggregate annotations into per-class posteriors")
    c.add_argument("--method", choices=METHODS, required=True)
    c.add_argument("--dataset", required=True)
    c.add_argument("--label-column", default=None)
    c.add_argument("--annotations", required=True)
    c.add_argument("--profiles", help="profiles JSON from `simulate`, fixes the expert index order")
    c.add_argument("--em-iterations", type=int, default=100)
    c.add_argument("--tolerance", type=float, default=1e-6)
    c.add_argument("--model-iterations", type=int, default=500)
    c.add_argument("--learning-rate", type=float, default=ClassifierSpec.learning_rate)
    c.add_argument("--out", required=True)
    c.add_argument("--reliability-out")
    c.set_defaults(func=cmd_consensus)

    lab = sub.add_parser("labels", help="turn posteriors into hard labels")
    lab.add_argument("--cutoff", choices=CUTOFFS, required=True)
    lab.add_argument("--posteriors", required=True)
    lab.add_argument("--dataset")
    lab.add_argument("--label-column", default="label")
    lab.add_argument("--single-label", action="store_true")
    lab.add_argument("--out", required=True)
    lab.set_defaults(func=cmd_labels)

    e = sub.add_parser("evaluate", help="annotation-quality metrics of a posterior file")
    e.add_argument("--posteriors", required=True)
    e.add_argument("--dataset", required=True)
    e.add_argument("--label-column", default="label")
    e.add_argument("--annotations", help="restrict metrics to annotated samples")
    e.set_defaults(func=cmd_evaluate)

    x = sub.add_parser("experiment", help="full multi-seed evaluation from a JSON config")
    x.add_argument("--config", required=True)
    x.add_argument("--output-dir", help=f"overrides config and ${OUTPUT_DIR_ENV}")
    x.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (LabelFusionError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
