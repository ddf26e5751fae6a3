"""Experiment driver: the paper-style studies at configurable scale.

Each experiment composes the active loop and the bootstrap pipeline over a
cross product of concepts, methods, budgets, and seeds, emitting one CSV
row per measured cell. A shared ExperimentContext memoizes trained models
and datasets so related experiments (classification and optimization
metrics over the same models) do not retrain.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .active import ActiveLoopConfig, QueryStrategy, run_active_loop
from .cem import CemConfig
from .concepts import ALL_CONCEPTS, ConceptId
from .errors import ConceptLabError
from .nets import TrainConfig
from .oracle import SimulatedHuman
from .pipeline import (
    bootstrap_dataset,
    build_balanced_testset,
    classification_accuracy,
    optimization_accuracy,
    train_baseline_direct,
    train_highdim,
)
from .render import RenderConfig
from .shapes import DEFAULT_CATALOG
from .util import child_rng, child_seed

EXPERIMENTS = (
    "pcb_vs_baseline",
    "query_factorial",
    "active_factorial",
    "noise_ablation",
    "demo_pcb",
    "opt_accuracy",
)

NOISE_LEVELS = (0.0, 0.01, 0.05, 0.10, 0.25, 0.50)

CSV_FIELDS = ("concept", "experiment", "method", "n_queries", "seed", "metric", "value")


@dataclass(frozen=True)
class ScalePreset:
    """Desk- or paper-scale sizes; every field can be overridden per run."""

    test_size: int
    bootstrap_size: int
    opt_problems: int
    budgets: tuple
    pcb_budget: int
    demo_budget: int
    points_per_object: int
    candidate_points: int
    batch_size: int
    lowdim_epochs: int
    lowdim_batch: int
    highdim_epochs: int
    highdim_batch: int
    seeds: tuple
    pose_cem_population: int
    pose_cem_iterations: int


SCALES = {
    "desk": ScalePreset(
        test_size=2000,
        bootstrap_size=8000,
        opt_problems=100,
        budgets=(100, 200, 300, 400, 500),
        pcb_budget=500,
        demo_budget=200,
        points_per_object=64,
        candidate_points=2048,
        batch_size=100,
        lowdim_epochs=40,
        lowdim_batch=128,
        highdim_epochs=6,
        highdim_batch=128,
        seeds=(0, 1, 2),
        pose_cem_population=32,
        pose_cem_iterations=20,
    ),
    "paper": ScalePreset(
        test_size=20000,
        bootstrap_size=80000,
        opt_problems=1000,
        budgets=tuple(range(100, 1001, 100)),
        pcb_budget=500,
        demo_budget=200,
        points_per_object=256,
        candidate_points=4096,
        batch_size=100,
        lowdim_epochs=60,
        lowdim_batch=64,
        highdim_epochs=20,
        highdim_batch=64,
        seeds=(0, 1, 2),
        pose_cem_population=64,
        pose_cem_iterations=30,
    ),
}


@dataclass
class ExperimentConfig:
    experiment: str
    concepts: tuple = tuple(c.value for c in ALL_CONCEPTS)
    scale: str = "desk"
    seed: int = 0
    out_dir: str = "results"
    seeds: tuple | None = None  # repetition seeds; None = preset (single for model-scale studies)
    budgets: tuple | None = None
    noise_levels: tuple = NOISE_LEVELS
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConceptLabError(
                f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}"
            )
        if self.scale not in SCALES:
            raise ConceptLabError(f"unknown scale {self.scale!r}")
        bad = set(self.overrides) - set(ScalePreset.__dataclass_fields__)
        if bad:
            raise ConceptLabError(f"unknown preset overrides: {sorted(bad)}")

    @property
    def preset(self) -> ScalePreset:
        return replace(SCALES[self.scale], **self.overrides)

    def concept_ids(self):
        return [ConceptId(c) for c in self.concepts]

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            doc = json.load(fh)
        for key in ("concepts", "seeds", "budgets", "noise_levels"):
            if key in doc and doc[key] is not None:
                doc[key] = tuple(doc[key])
        return cls(**doc)

    def to_json(self) -> str:
        return json.dumps(
            {
                "experiment": self.experiment,
                "concepts": list(self.concepts),
                "scale": self.scale,
                "seed": self.seed,
                "out_dir": self.out_dir,
                "seeds": None if self.seeds is None else list(self.seeds),
                "budgets": None if self.budgets is None else list(self.budgets),
                "noise_levels": list(self.noise_levels),
                "overrides": self.overrides,
            },
            indent=2,
        )


@dataclass(frozen=True)
class ResultRow:
    concept: str
    experiment: str
    method: str
    n_queries: int
    seed: int
    metric: str
    value: float

    def csv(self) -> str:
        return (
            f"{self.concept},{self.experiment},{self.method},"
            f"{self.n_queries},{self.seed},{self.metric},{self.value:.6f}"
        )


# --------------------------------------------------------------------------
# Shared, memoized pipeline artifacts
# --------------------------------------------------------------------------


class ExperimentContext:
    """Memoizes eval sets, loops, and trained models for one (config, seed)
    universe so stacked experiments reuse instead of retraining."""

    def __init__(self, preset: ScalePreset, root_seed: int, catalog=None):
        self.preset = preset
        self.root_seed = root_seed
        self.catalog = DEFAULT_CATALOG if catalog is None else catalog
        self.render_cfg = RenderConfig(
            points_per_object=preset.points_per_object,
            candidate_points=preset.candidate_points,
        )
        self._cache = {}

    def _memo(self, key, build):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    def eval_set(self, concept: ConceptId, rendered: bool):
        def build():
            return build_balanced_testset(
                concept,
                self.preset.test_size,
                child_rng(self.root_seed, "eval", concept.value, int(rendered)),
                self.catalog,
                render_cfg=self.render_cfg if rendered else None,
            )

        return self._memo(("eval", concept, rendered), build)

    def _human(self, concept, seed, noise=0.0) -> SimulatedHuman:
        return SimulatedHuman(
            concept,
            noise,
            np.random.default_rng(child_seed(self.root_seed, "human", concept.value, seed)),
            self.catalog,
        )

    def lowdim_train_cfg(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.preset.lowdim_epochs, batch_size=self.preset.lowdim_batch
        )

    def run_loop(
        self,
        concept: ConceptId,
        seed: int,
        strategy: QueryStrategy,
        feature: bool,
        query_kind: str = "label",
        budget: int | None = None,
        noise: float = 0.0,
        render: bool = False,
        eval_set=None,
    ):
        key = (
            "loop",
            concept,
            seed,
            strategy,
            feature,
            query_kind,
            budget,
            noise,
            render,
            eval_set is not None,
        )

        def build():
            cfg = ActiveLoopConfig(
                concept=concept,
                budget=budget or self.preset.pcb_budget,
                batch_size=self.preset.batch_size,
                strategy=strategy,
                use_feature_queries=feature,
                query_kind=query_kind,
                seed=child_seed(self.root_seed, "loop", concept.value, seed, query_kind),
                train=self.lowdim_train_cfg(),
                model_dtype="float32",
                render=self.render_cfg if render else None,
            )
            return run_active_loop(
                cfg, self._human(concept, seed, noise), self.catalog, eval_set=eval_set
            )

        return self._memo(key, build)

    def pcb_loop(self, concept: ConceptId, seed: int):
        """The reference low-dim concept: confrand + augment + feature queries."""
        return self.run_loop(
            concept,
            seed,
            QueryStrategy(kind="confrand", augment=True),
            feature=True,
            render=True,
        )

    def pcb_phi_h(self, concept: ConceptId, seed: int):
        def build():
            phi_l = self.pcb_loop(concept, seed).checkpoints[-1]
            boot = bootstrap_dataset(
                phi_l,
                concept,
                self.preset.bootstrap_size,
                child_rng(self.root_seed, "boot", concept.value, seed),
                self.catalog,
                self.render_cfg,
            )
            return train_highdim(boot, self.highdim_train_cfg(concept, seed), dtype="float32")

        return self._memo(("pcb_phi_h", concept, seed), build)

    def demo_loop(self, concept: ConceptId, seed: int):
        return self.run_loop(
            concept,
            seed,
            QueryStrategy(kind="random"),
            feature=True,
            query_kind="demo",
            budget=self.preset.demo_budget,
            render=True,
        )

    def demo_phi_h(self, concept: ConceptId, seed: int):
        def build():
            phi_l = self.demo_loop(concept, seed).checkpoints[-1]
            boot = bootstrap_dataset(
                phi_l,
                concept,
                self.preset.bootstrap_size,
                child_rng(self.root_seed, "demo_boot", concept.value, seed),
                self.catalog,
                self.render_cfg,
            )
            return train_highdim(boot, self.highdim_train_cfg(concept, seed), dtype="float32")

        return self._memo(("demo_phi_h", concept, seed), build)

    def random_query_loop(self, concept: ConceptId, seed: int):
        return self.run_loop(
            concept, seed, QueryStrategy(kind="random"), feature=False, render=True
        )

    def highdim_train_cfg(self, concept, seed) -> TrainConfig:
        """One config for PCB's perceptual net and every direct baseline, so
        only the training dataset differs between methods."""
        return TrainConfig(
            epochs=self.preset.highdim_epochs,
            batch_size=self.preset.highdim_batch,
            seed=child_seed(self.root_seed, "phi_h", concept.value, seed),
            balance=True,
        )

    def direct_random_model(self, concept: ConceptId, seed: int):
        def build():
            queries = self.random_query_loop(concept, seed).dataset
            return train_baseline_direct(
                queries, self.highdim_train_cfg(concept, seed), dtype="float32"
            )

        return self._memo(("direct_random", concept, seed), build)

    def direct_active_model(self, concept: ConceptId, seed: int):
        def build():
            queries = self.pcb_loop(concept, seed).dataset
            return train_baseline_direct(
                queries, self.highdim_train_cfg(concept, seed), dtype="float32"
            )

        return self._memo(("direct_active", concept, seed), build)

    def direct_demo_model(self, concept: ConceptId, seed: int):
        def build():
            queries = self.demo_loop(concept, seed).dataset
            return train_baseline_direct(
                queries, self.highdim_train_cfg(concept, seed), dtype="float32"
            )

        return self._memo(("direct_demo", concept, seed), build)

    def pose_cem(self) -> CemConfig:
        return CemConfig(
            population=self.preset.pose_cem_population,
            iterations=self.preset.pose_cem_iterations,
        )


# --------------------------------------------------------------------------
# Experiment bodies
# --------------------------------------------------------------------------


def _model_seeds(cfg: ExperimentConfig):
    """Model-scale studies follow the single fixed-seed protocol unless the
    config asks for more."""
    return cfg.seeds if cfg.seeds is not None else (cfg.preset.seeds[0],)


def _analysis_seeds(cfg: ExperimentConfig):
    return cfg.seeds if cfg.seeds is not None else cfg.preset.seeds


def _curve_rows(cfg, ctx, concept, seed, method, result, experiment):
    rows = []
    for record in result.records:
        rows.append(
            ResultRow(
                concept.value,
                experiment,
                method,
                record.n_queries,
                seed,
                "classification_accuracy",
                record.accuracy,
            )
        )
    return rows


def _run_pcb_vs_baseline(cfg, ctx, emit):
    for concept in cfg.concept_ids():
        for seed in _model_seeds(cfg):
            eval_set = ctx.eval_set(concept, rendered=True)
            cells = {
                "pcb": lambda: classification_accuracy(
                    ctx.pcb_phi_h(concept, seed), eval_set, "cloud"
                ),
                "direct_random": lambda: classification_accuracy(
                    ctx.direct_random_model(concept, seed), eval_set, "cloud"
                ),
                "direct_active": lambda: classification_accuracy(
                    ctx.direct_active_model(concept, seed), eval_set, "cloud"
                ),
            }
            for method, run in cells.items():
                emit_cell(
                    emit,
                    cfg,
                    concept,
                    method,
                    cfg.preset.pcb_budget,
                    seed,
                    "classification_accuracy",
                    run,
                )


def _run_demo_pcb(cfg, ctx, emit):
    for concept in cfg.concept_ids():
        for seed in _model_seeds(cfg):
            eval_set = ctx.eval_set(concept, rendered=True)
            cells = {
                "pcb_demo": lambda: classification_accuracy(
                    ctx.demo_phi_h(concept, seed), eval_set, "cloud"
                ),
                "direct_demo": lambda: classification_accuracy(
                    ctx.direct_demo_model(concept, seed), eval_set, "cloud"
                ),
            }
            for method, run in cells.items():
                emit_cell(
                    emit,
                    cfg,
                    concept,
                    method,
                    cfg.preset.demo_budget,
                    seed,
                    "classification_accuracy",
                    run,
                )


def _run_opt_accuracy(cfg, ctx, emit):
    for concept in cfg.concept_ids():
        for seed in _model_seeds(cfg):
            for method, model_fn in (
                ("pcb", ctx.pcb_phi_h),
                ("direct_random", ctx.direct_random_model),
            ):
                def run(method=method, model_fn=model_fn):
                    model = model_fn(concept, seed)
                    return optimization_accuracy(
                        model,
                        concept,
                        cfg.preset.opt_problems,
                        child_rng(cfg.seed, "opt", concept.value, seed, method),
                        ctx.catalog,
                        ctx.render_cfg,
                        cem=ctx.pose_cem(),
                    )

                emit_cell(
                    emit,
                    cfg,
                    concept,
                    method,
                    cfg.preset.pcb_budget,
                    seed,
                    "optimization_accuracy",
                    run,
                )


def _run_query_factorial(cfg, ctx, emit):
    budgets = cfg.budgets or cfg.preset.budgets
    budget = max(budgets)
    for concept in cfg.concept_ids():
        eval_set = ctx.eval_set(concept, rendered=False)
        for seed in _analysis_seeds(cfg):
            for query_kind in ("random_label", "demo"):
                for feature in (True, False):
                    method = f"{query_kind}_{'feature' if feature else 'nofeature'}"

                    def run(query_kind=query_kind, feature=feature):
                        result = ctx.run_loop(
                            concept,
                            seed,
                            QueryStrategy(kind="random"),
                            feature=feature,
                            query_kind="demo" if query_kind == "demo" else "label",
                            budget=budget,
                            eval_set=eval_set,
                        )
                        return [
                            (r.n_queries, r.accuracy)
                            for r in result.records
                            if r.n_queries in budgets
                        ]

                    emit_curve(emit, cfg, concept, method, seed, run)


def _run_active_factorial(cfg, ctx, emit):
    budgets = cfg.budgets or cfg.preset.budgets
    budget = max(budgets)
    for concept in cfg.concept_ids():
        eval_set = ctx.eval_set(concept, rendered=False)
        for seed in _analysis_seeds(cfg):
            for kind in ("random", "confusion", "confrand"):
                for augment in (True, False):
                    strategy = QueryStrategy(kind=kind, augment=augment)

                    def run(strategy=strategy):
                        result = ctx.run_loop(
                            concept,
                            seed,
                            strategy,
                            feature=True,
                            budget=budget,
                            eval_set=eval_set,
                        )
                        return [
                            (r.n_queries, r.accuracy)
                            for r in result.records
                            if r.n_queries in budgets
                        ]

                    emit_curve(emit, cfg, concept, strategy.label(), seed, run)


def _run_noise_ablation(cfg, ctx, emit):
    budgets = cfg.budgets or cfg.preset.budgets
    budget = max(budgets)
    for concept in cfg.concept_ids():
        eval_set = ctx.eval_set(concept, rendered=False)
        for seed in _analysis_seeds(cfg):
            for noise in cfg.noise_levels:
                method = f"noise_{noise:g}"

                def run(noise=noise):
                    result = ctx.run_loop(
                        concept,
                        seed,
                        QueryStrategy(kind="confrand", augment=True),
                        feature=True,
                        budget=budget,
                        noise=noise,
                        eval_set=eval_set,
                    )
                    return [
                        (r.n_queries, r.accuracy)
                        for r in result.records
                        if r.n_queries in budgets
                    ]

                emit_curve(emit, cfg, concept, method, seed, run)


def emit_cell(emit, cfg, concept, method, n_queries, seed, metric, run):
    """Run one cell; failures become a recorded row instead of an abort."""
    try:
        value = run()
    except ConceptLabError:
        emit(ResultRow(concept.value, cfg.experiment, method, n_queries, seed, "failed", 0.0))
        return
    emit(ResultRow(concept.value, cfg.experiment, method, n_queries, seed, metric, float(value)))


def emit_curve(emit, cfg, concept, method, seed, run):
    try:
        points = run()
    except ConceptLabError:
        emit(ResultRow(concept.value, cfg.experiment, method, 0, seed, "failed", 0.0))
        return
    for n_queries, accuracy in points:
        emit(
            ResultRow(
                concept.value,
                cfg.experiment,
                method,
                n_queries,
                seed,
                "classification_accuracy",
                float(accuracy),
            )
        )


_RUNNERS = {
    "pcb_vs_baseline": _run_pcb_vs_baseline,
    "query_factorial": _run_query_factorial,
    "active_factorial": _run_active_factorial,
    "noise_ablation": _run_noise_ablation,
    "demo_pcb": _run_demo_pcb,
    "opt_accuracy": _run_opt_accuracy,
}


def run_experiment(cfg: ExperimentConfig, writer=None, context: ExperimentContext | None = None):
    """Execute one experiment; returns all rows and streams them to `writer`
    (a callable taking a ResultRow) as cells complete."""
    ctx = context or ExperimentContext(cfg.preset, cfg.seed)
    rows = []

    def emit(row: ResultRow):
        rows.append(row)
        if writer is not None:
            writer(row)

    _RUNNERS[cfg.experiment](cfg, ctx, emit)
    return rows


class CsvWriter:
    """Append-only, flush-per-row results sink."""

    def __init__(self, path):
        self.path = path
        import os

        new = not os.path.exists(path)
        self._fh = open(path, "a")
        if new:
            self._fh.write(",".join(CSV_FIELDS) + "\n")
            self._fh.flush()

    def __call__(self, row: ResultRow) -> None:
        self._fh.write(row.csv() + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()


def parse_results_csv(path):
    rows = []
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        assert header == list(CSV_FIELDS), f"unexpected header {header}"
        for line in fh:
            parts = line.strip().split(",")
            if len(parts) != 7:
                continue
            rows.append(
                ResultRow(
                    parts[0], parts[1], parts[2], int(parts[3]), int(parts[4]), parts[5], float(parts[6])
                )
            )
    return rows


def summarize(rows) -> str:
    """Seed-averaged means per (experiment, metric, concept, method), one
    learning-curve line per method."""
    if not rows:
        raise ConceptLabError("no rows to summarize")
    groups = {}
    for row in rows:
        key = (row.experiment, row.metric, row.concept, row.method, row.n_queries)
        groups.setdefault(key, []).append(row.value)
    tables = {}
    for (experiment, metric, concept, method, n_queries), values in sorted(groups.items()):
        tables.setdefault((experiment, metric), {}).setdefault((concept, method), []).append(
            (n_queries, float(np.mean(values)))
        )
    lines = []
    for (experiment, metric), curves in tables.items():
        lines.append(f"== {experiment} :: {metric} ==")
        budgets = sorted({n for pts in curves.values() for n, _ in pts})
        header = f"{'concept':14s} {'method':26s}" + "".join(f"{b:>8d}" for b in budgets)
        lines.append(header)
        for (concept, method), pts in sorted(curves.items()):
            by_budget = dict(pts)
            cells = "".join(
                f"{by_budget[b]:8.3f}" if b in by_budget else " " * 8 for b in budgets
            )
            lines.append(f"{concept:14s} {method:26s}{cells}")
        lines.append("")
    return "\n".join(lines)
