"""Command line driver: dataset generation, training stages, and the
paper-style experiment suites with CSV output."""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .active import ActiveLoopConfig, QueryStrategy, run_active_loop
from .concepts import ALL_CONCEPTS, ConceptId
from .datasets import (
    load_bootstrap_dataset,
    load_eval_dataset,
    save_bootstrap_dataset,
    save_eval_dataset,
    save_labeled_dataset,
)
from .experiments import (
    SCALES,
    CsvWriter,
    ExperimentConfig,
    parse_results_csv,
    run_experiment,
    summarize,
)
from .nets import TrainConfig, model_from_json, model_to_json
from .oracle import SimulatedHuman
from .pipeline import (
    bootstrap_dataset,
    build_balanced_testset,
    classification_accuracy,
    optimization_accuracy,
    train_highdim,
)
from .render import RenderConfig
from .shapes import DEFAULT_CATALOG
from .util import child_rng, child_seed


def _render_cfg(preset) -> RenderConfig:
    return RenderConfig(
        points_per_object=preset.points_per_object,
        candidate_points=preset.candidate_points,
    )


def _load_model(path):
    with open(path) as fh:
        return model_from_json(fh.read())


def _save_model(path, model) -> None:
    with open(path, "w") as fh:
        fh.write(model_to_json(model))


def cmd_gen_data(args) -> int:
    preset = SCALES[args.scale]
    concept = ConceptId(args.concept)
    n = args.n or preset.test_size
    rng = child_rng(args.seed, "eval", concept.value, int(args.render))
    ds = build_balanced_testset(
        concept, n, rng, render_cfg=_render_cfg(preset) if args.render else None
    )
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, f"testset_{concept.value}.bin")
    save_eval_dataset(path, ds, DEFAULT_CATALOG, seed=args.seed)
    print(f"wrote {len(ds.labels)} balanced records to {path}")
    return 0


def cmd_train_lowdim(args) -> int:
    preset = SCALES[args.scale]
    concept = ConceptId(args.concept)
    strategy = QueryStrategy(kind=args.strategy, augment=args.augment)
    cfg = ActiveLoopConfig(
        concept=concept,
        budget=args.budget,
        batch_size=preset.batch_size,
        strategy=strategy,
        use_feature_queries=args.feature_queries,
        query_kind=args.query_kind,
        seed=child_seed(args.seed, "loop", concept.value),
        train=TrainConfig(epochs=preset.lowdim_epochs, batch_size=preset.lowdim_batch),
        model_dtype="float32",
        render=_render_cfg(preset) if args.render_queries else None,
    )
    human = SimulatedHuman(
        concept, args.noise, child_rng(args.seed, "human", concept.value)
    )
    result = run_active_loop(cfg, human)
    os.makedirs(args.out, exist_ok=True)
    model_path = os.path.join(args.out, f"lowdim_{concept.value}.json")
    _save_model(model_path, result.checkpoints[-1])
    data_path = os.path.join(args.out, f"queries_{concept.value}.bin")
    save_labeled_dataset(data_path, result.dataset, DEFAULT_CATALOG, seed=args.seed)
    print(f"wrote {model_path} and {len(result.dataset)} queries to {data_path}")
    return 0


def cmd_bootstrap(args) -> int:
    preset = SCALES[args.scale]
    concept = ConceptId(args.concept)
    phi_l = _load_model(args.model)
    n = args.n or preset.bootstrap_size
    ds = bootstrap_dataset(
        phi_l,
        concept,
        n,
        child_rng(args.seed, "boot", concept.value),
        render_cfg=_render_cfg(preset),
    )
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, f"bootstrap_{concept.value}.bin")
    save_bootstrap_dataset(path, ds, DEFAULT_CATALOG, seed=args.seed)
    print(f"wrote {n} auto-labeled records to {path} (positives {ds.labels.mean():.3f})")
    return 0


def cmd_train_highdim(args) -> int:
    preset = SCALES[args.scale]
    ds = load_bootstrap_dataset(args.data, DEFAULT_CATALOG)
    cfg = TrainConfig(
        epochs=args.epochs or preset.highdim_epochs,
        batch_size=preset.highdim_batch,
        seed=child_seed(args.seed, "phi_h", ds.concept.value),
        balance=True,
    )
    model = train_highdim(ds, cfg, dtype="float32")
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, f"highdim_{ds.concept.value}.json")
    _save_model(path, model)
    print(f"wrote {path}")
    return 0


def cmd_eval(args) -> int:
    preset = SCALES[args.scale]
    model = _load_model(args.model)
    concept = ConceptId(args.concept)
    if args.testset:
        eval_set = load_eval_dataset(args.testset, DEFAULT_CATALOG)
    else:
        rendered = args.kind == "cloud"
        eval_set = build_balanced_testset(
            concept,
            args.n or preset.test_size,
            child_rng(args.seed, "eval", concept.value, int(rendered)),
            render_cfg=_render_cfg(preset) if rendered else None,
        )
    acc = classification_accuracy(model, eval_set, args.kind)
    print(f"classification_accuracy {concept.value} {args.kind}: {acc:.4f}")
    if args.opt_problems:
        opt = optimization_accuracy(
            model,
            concept,
            args.opt_problems,
            child_rng(args.seed, "opt", concept.value),
            render_cfg=_render_cfg(preset),
        )
        print(f"optimization_accuracy {concept.value}: {opt:.4f}")
    return 0


def cmd_experiment(args) -> int:
    if args.config:
        cfg = ExperimentConfig.from_json(args.config)
        if args.out:
            cfg.out_dir = args.out
    else:
        if not args.name:
            print("either --config or an experiment name is required", file=sys.stderr)
            return 2
        cfg = ExperimentConfig(
            experiment=args.name,
            scale=args.scale,
            seed=args.seed,
            out_dir=args.out or "results",
            concepts=tuple(args.concepts) if args.concepts else tuple(c.value for c in ALL_CONCEPTS),
        )
    os.makedirs(cfg.out_dir, exist_ok=True)
    with open(os.path.join(cfg.out_dir, f"config_{cfg.experiment}.json"), "w") as fh:
        fh.write(cfg.to_json())
    writer = CsvWriter(os.path.join(cfg.out_dir, "results.csv"))
    try:
        rows = run_experiment(cfg, writer=writer)
    finally:
        writer.close()
    print(f"{len(rows)} rows appended to {os.path.join(cfg.out_dir, 'results.csv')}")
    return 0


def cmd_summarize(args) -> int:
    rows = parse_results_csv(args.results)
    print(summarize(rows))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="conceptlab",
        description="Spatial-concept learning lab: few-query teaching, "
        "bootstrapped point-cloud classifiers, and the accompanying studies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default="results")
        p.add_argument("--scale", choices=sorted(SCALES), default="desk")

    p = sub.add_parser("gen-data", help="generate and cache a balanced test set")
    common(p)
    p.add_argument("--concept", required=True, choices=[c.value for c in ALL_CONCEPTS])
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--render", action="store_true", help="also render point clouds")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train-lowdim", help="run the query loop and train the low-dim concept")
    common(p)
    p.add_argument("--concept", required=True, choices=[c.value for c in ALL_CONCEPTS])
    p.add_argument("--budget", type=int, default=500)
    p.add_argument("--strategy", choices=("random", "confusion", "confrand"), default="confrand")
    p.add_argument("--augment", action="store_true", default=True)
    p.add_argument("--no-augment", dest="augment", action="store_false")
    p.add_argument("--feature-queries", action="store_true", default=True)
    p.add_argument("--no-feature-queries", dest="feature_queries", action="store_false")
    p.add_argument("--query-kind", choices=("label", "demo"), default="label")
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--render-queries", action="store_true",
                   help="render a cloud per query (needed for direct baselines)")
    p.set_defaults(func=cmd_train_lowdim)

    p = sub.add_parser("bootstrap", help="auto-label a large random dataset with a low-dim model")
    common(p)
    p.add_argument("--concept", required=True, choices=[c.value for c in ALL_CONCEPTS])
    p.add_argument("--model", required=True, help="low-dim model JSON path")
    p.add_argument("--n", type=int, default=None)
    p.set_defaults(func=cmd_bootstrap)

    p = sub.add_parser("train-highdim", help="train the point-cloud concept on a bootstrap cache")
    common(p)
    p.add_argument("--data", required=True, help="bootstrap cache path")
    p.add_argument("--epochs", type=int, default=None)
    p.set_defaults(func=cmd_train_highdim)

    p = sub.add_parser("eval", help="evaluate a model on a balanced test set")
    common(p)
    p.add_argument("--concept", required=True, choices=[c.value for c in ALL_CONCEPTS])
    p.add_argument("--model", required=True)
    p.add_argument("--kind", choices=("privileged", "cloud"), default="privileged")
    p.add_argument("--testset", default=None, help="cached test set (else generated)")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--opt-problems", type=int, default=0,
                   help="also measure optimization accuracy on this many problems")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("experiment", help="run a named study and append rows to results.csv")
    common(p)
    p.add_argument("name", nargs="?", default=None,
                   help="experiment id (or use --config)")
    p.add_argument("--config", default=None, help="experiment config JSON")
    p.add_argument("--concepts", nargs="*", default=None)
    p.set_defaults(func=cmd_experiment, out=None)

    p = sub.add_parser("summarize", help="print seed-averaged tables from a results CSV")
    p.add_argument("--results", required=True)
    p.set_defaults(func=cmd_summarize)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
