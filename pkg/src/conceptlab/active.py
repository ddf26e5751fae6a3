"""Query synthesis strategies and the batched active-learning loop.

The loop interleaves synthesizing a batch of query states, asking the
simulated human for labels, and retraining the low-dimensional concept
from scratch on everything labeled so far. Confusion queries search for
states near the current model's decision boundary with the cross-entropy
method; augment queries perturb a stored example of the rarer class.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .cem import CemConfig, cem_minimize
from .concepts import ConceptId
from .datasets import EvalDataset, LabeledDataset
from .errors import SamplerError
from .geometry import Pose, quat_from_axis_angle, quat_mul, quat_normalize
from .nets import MlpModel, TrainConfig, train_classifier
from .oracle import SimulatedHuman, answer_feature_queries, demo_scene
from .render import RenderConfig, render_or_none
from .scene import (
    FEATURE_DIM,
    MOVING_Z_MAX,
    WORKSPACE_HALF_XY,
    SceneState,
    batch_privileged_features,
    feature_mask_from_answers,
    moving_z_bounds,
    objects_interpenetrate,
    privileged_features,
    sample_scene,
)
from .shapes import DEFAULT_CATALOG
from .util import child_seed

AUGMENT_POSITION_STD = 0.08
AUGMENT_ROTATION_STD = 0.1
_BOUNDS_PENALTY = 50.0


@dataclass(frozen=True)
class QueryStrategy:
    kind: str = "random"  # random | confusion | confrand
    augment: bool = False
    exploit_prob: float = 0.5
    confusion_prob: float = 0.5  # confrand's coin

    def __post_init__(self):
        if self.kind not in ("random", "confusion", "confrand"):
            raise ValueError(f"unknown strategy kind {self.kind}")
        for p in (self.exploit_prob, self.confusion_prob):
            if not 0.0 <= p <= 1.0:
                raise ValueError("probabilities must be in [0, 1]")

    def label(self) -> str:
        return f"{self.kind}_{'augment' if self.augment else 'noaugment'}"


class QueryMemory:
    """Labeled states so far, indexed by label."""

    def __init__(self):
        self.by_label = {0: [], 1: []}

    def add(self, scene: SceneState, label: int) -> None:
        self.by_label[label].append(scene)

    def counts(self) -> tuple[int, int]:
        return len(self.by_label[0]), len(self.by_label[1])

    def rarer_label(self) -> int:
        neg, pos = self.counts()
        return 1 if pos <= neg else 0  # ties favor positives


@dataclass
class ActiveLoopConfig:
    concept: ConceptId
    budget: int
    batch_size: int = 100
    strategy: QueryStrategy = field(default_factory=QueryStrategy)
    use_feature_queries: bool = False
    query_kind: str = "label"  # label | demo
    seed: int = 0
    train: TrainConfig = field(default_factory=TrainConfig)
    hidden: tuple = (256, 256, 256)
    model_dtype: str = "float64"
    render: RenderConfig | None = None  # render a cloud per accepted query
    cem: CemConfig | None = None  # confusion-query optimizer settings

    def __post_init__(self):
        if self.budget <= 0 or self.budget % self.batch_size != 0:
            raise ValueError("budget must be a positive multiple of batch_size")
        if self.query_kind not in ("label", "demo"):
            raise ValueError(f"unknown query kind {self.query_kind}")


@dataclass
class RoundRecord:
    round: int
    n_queries: int
    strategy: str
    accuracy: float | None


@dataclass
class ActiveLoopResult:
    dataset: LabeledDataset
    checkpoints: list
    records: list


class QuerySynthesizer:
    """Produces query states for one concept under a given strategy."""

    def __init__(self, catalog, concept: ConceptId, mask=None, cem_cfg: CemConfig | None = None):
        self.catalog = catalog
        self.concept = concept
        self.mask = mask
        self.cem_cfg = cem_cfg or CemConfig()
        self.kind_counts = {"random": 0, "confusion": 0, "augment": 0}

    def synthesize(
        self,
        strategy: QueryStrategy,
        model: MlpModel | None,
        memory: QueryMemory,
        rng: np.random.Generator,
    ) -> SceneState:
        if strategy.augment and rng.random() < strategy.exploit_prob:
            stored = memory.by_label[memory.rarer_label()]
            if stored:
                self.kind_counts["augment"] += 1
                return self._perturb(stored[rng.integers(len(stored))], rng)
        kind = strategy.kind
        if kind == "confrand":
            kind = "confusion" if rng.random() < strategy.confusion_prob else "random"
        if kind == "confusion" and model is None:
            kind = "random"  # cold start: no model before the first batch
        self.kind_counts[kind] += 1
        if kind == "random":
            return sample_scene(self.catalog, self.concept, rng)
        return self._confusion(model, rng)

    def _perturb(self, scene: SceneState, rng: np.random.Generator) -> SceneState:
        pose = scene.moving.pose
        for _ in range(20):
            position = pose.position + rng.normal(0.0, AUGMENT_POSITION_STD, 3)
            wobble = quat_from_axis_angle(rng.normal(0.0, AUGMENT_ROTATION_STD, 3))
            orientation = quat_mul(wobble, pose.orientation)
            position = self._clamp(position, scene)
            candidate = scene.with_moving_pose(Pose(position, orientation))
            if not objects_interpenetrate(candidate):
                return candidate
        return scene

    def _clamp(self, position: np.ndarray, scene: SceneState) -> np.ndarray:
        lo_z, hi_z = moving_z_bounds(scene.moving.spec, scene.table_height)
        return np.array(
            [
                np.clip(position[0], -WORKSPACE_HALF_XY, WORKSPACE_HALF_XY),
                np.clip(position[1], -WORKSPACE_HALF_XY, WORKSPACE_HALF_XY),
                np.clip(position[2], lo_z, hi_z),
            ]
        )

    def _confusion(self, model: MlpModel, rng: np.random.Generator) -> SceneState:
        """CEM over the moving pose toward model output 0.5."""
        base = sample_scene(self.catalog, self.concept, rng)
        anchor = base.anchor
        moving = base.moving
        lo_z, hi_z = moving_z_bounds(moving.spec, base.table_height)
        q0 = moving.pose.orientation
        anchor_ext = anchor.spec.half_extents.half_extents
        moving_ext = moving.spec.half_extents.half_extents

        def cost(x):
            positions = x[:, :3]
            quats = quat_mul(quat_from_axis_angle(x[:, 3:]), q0)
            feats = batch_privileged_features(
                anchor.pose, anchor_ext, positions, quats, moving_ext
            )
            probs = model.forward(feats)
            violation = (
                np.maximum(np.abs(positions[:, 0]) - WORKSPACE_HALF_XY, 0.0)
                + np.maximum(np.abs(positions[:, 1]) - WORKSPACE_HALF_XY, 0.0)
                + np.maximum(lo_z - positions[:, 2], 0.0)
                + np.maximum(positions[:, 2] - hi_z, 0.0)
            )
            return np.abs(probs - 0.5) + _BOUNDS_PENALTY * violation

        init_mean = np.concatenate([moving.pose.position, np.zeros(3)])
        init_std = np.array([0.15, 0.15, 0.1, 0.6, 0.6, 0.6])
        cfg = replace(
            self.cem_cfg,
            init_std=init_std,
            seed=int(rng.integers(np.iinfo(np.int64).max)),
        )
        best, _ = cem_minimize(cost, init_mean, cfg)
        position = self._clamp(best[:3], base)
        orientation = quat_normalize(quat_mul(quat_from_axis_angle(best[3:]), q0))
        candidate = base.with_moving_pose(Pose(position, orientation))
        # keep the query physically plausible; the base draw already is
        return base if objects_interpenetrate(candidate) else candidate


def run_active_loop(
    cfg: ActiveLoopConfig,
    human: SimulatedHuman,
    catalog=None,
    eval_set: EvalDataset | None = None,
) -> ActiveLoopResult:
    """Batched query/label/retrain loop producing the human-labeled dataset
    and one model checkpoint per round."""
    from .pipeline import classification_accuracy

    catalog = DEFAULT_CATALOG if catalog is None else catalog
    answers = answer_feature_queries(cfg.concept) if cfg.use_feature_queries else None
    mask = feature_mask_from_answers(answers) if answers is not None else None
    synth = QuerySynthesizer(catalog, cfg.concept, mask, cfg.cem)
    memory = QueryMemory()
    dataset = LabeledDataset(cfg.concept, feature_answers=answers)
    rng = np.random.default_rng(child_seed(cfg.seed, "queries"))

    model = None
    checkpoints = []
    records = []
    n_rounds = cfg.budget // cfg.batch_size
    query_index = 0
    for round_idx in range(n_rounds):
        for _ in range(cfg.batch_size):
            scene, cloud = _next_query(cfg, synth, model, memory, rng, query_index, catalog)
            label = human.answer_label_query(scene)
            obs = privileged_features(scene)
            feats = np.where(mask, obs.features, 0.0) if mask is not None else obs.features
            dataset.append(scene, feats, label, cloud)
            memory.add(scene, label)
            query_index += 1

        model = MlpModel(
            input_dim=FEATURE_DIM,
            hidden=cfg.hidden,
            seed=child_seed(cfg.seed, "init", round_idx),
            dtype=np.dtype(cfg.model_dtype),
        )
        model.input_mask = mask
        round_train = replace(cfg.train, seed=child_seed(cfg.seed, "train", round_idx))
        train_classifier(model, dataset.features, dataset.label_array, round_train)
        accuracy = (
            classification_accuracy(model, eval_set, "privileged")
            if eval_set is not None
            else None
        )
        checkpoints.append(model)
        records.append(
            RoundRecord(
                round=round_idx,
                n_queries=len(dataset),
                strategy=cfg.strategy.label() if cfg.query_kind == "label" else "demo",
                accuracy=accuracy,
            )
        )
    return ActiveLoopResult(dataset, checkpoints, records)


def _next_query(cfg, synth, model, memory, rng, query_index, catalog):
    """One query state, re-synthesized until it renders if clouds are on."""
    for _ in range(200):
        if cfg.query_kind == "demo":
            desired = 1 if query_index % 2 == 0 else 0
            scene = demo_scene(cfg.concept, desired, rng, catalog)
        else:
            scene = synth.synthesize(cfg.strategy, model, memory, rng)
        if cfg.render is None:
            return scene, None
        cloud = render_or_none(scene, cfg.render, rng)
        if cloud is not None:
            return scene, cloud
    raise SamplerError("could not synthesize a renderable query state")
