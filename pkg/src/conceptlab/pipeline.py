"""Bootstrapping, evaluation metrics, and concept-driven pose optimization.

The trained low-dimensional concept labels a large randomly generated
dataset, which trains the perceptual (point-cloud) concept. Both are
scored on exactly balanced ground-truth test sets; the perceptual concept
is additionally scored by how often cross-entropy pose optimization turns
a concept-violating state into a ground-truth positive.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .cem import CemConfig, cem_minimize
from .concepts import ConceptId
from .datasets import BootstrapDataset, EvalDataset, LabeledDataset, clouds_matrix
from .errors import SamplerError
from .geometry import IDENTITY_QUAT, Pose, quat_cost, quat_from_axis_angle
from .nets import MlpModel, PointSetModel, TrainConfig, train_classifier
from .oracle import concept_value, demo_scene, scene_label
from .render import (
    PointCloudObservation,
    RenderConfig,
    apply_world_motion,
    batch_transform_moving,
    camera_to_world,
    delta_to_world_motion,
    render_or_none,
    sample_visible_scene,
)
from .scene import (
    MOVING_Z_MAX,
    WORKSPACE_HALF_XY,
    SceneState,
    privileged_features,
    sample_scene,
)
from .shapes import DEFAULT_CATALOG

POSE_LAMBDA = 0.001
_EVAL_CHUNK = 512


def model_predictions(model, eval_set: EvalDataset, observation_kind: str) -> np.ndarray:
    if observation_kind == "privileged":
        return model.forward(eval_set.features)
    if observation_kind == "cloud":
        if eval_set.clouds is None:
            raise ValueError("eval set has no rendered clouds")
        probs = []
        for start in range(0, len(eval_set.clouds), _EVAL_CHUNK):
            batch = clouds_matrix(eval_set.clouds[start : start + _EVAL_CHUNK])
            probs.append(model.forward(batch))
        return np.concatenate(probs)
    raise ValueError(f"unknown observation kind {observation_kind}")


def classification_accuracy(model, eval_set: EvalDataset, observation_kind: str) -> float:
    """Fraction of the balanced test set classified correctly at 0.5."""
    probs = model_predictions(model, eval_set, observation_kind)
    return float(np.mean((probs > 0.5).astype(np.int64) == eval_set.labels))


def bootstrap_dataset(
    phi_l: MlpModel,
    concept: ConceptId,
    n: int,
    rng: np.random.Generator,
    catalog=None,
    render_cfg: RenderConfig | None = None,
) -> BootstrapDataset:
    """Random states auto-labeled by thresholding the low-dim concept at 0.5.

    The model's own input mask reproduces whatever feature pruning it was
    trained with; stored features stay unmasked.
    """
    catalog = DEFAULT_CATALOG if catalog is None else catalog
    render_cfg = render_cfg or RenderConfig()
    scenes, feats, clouds = [], [], []
    for _ in range(n):
        scene, cloud = sample_visible_scene(catalog, concept, rng, render_cfg)
        scenes.append(scene)
        feats.append(privileged_features(scene).features)
        clouds.append(cloud)
    features = np.asarray(feats)
    labels = (phi_l.forward(features) > 0.5).astype(np.int64)
    return BootstrapDataset(concept, scenes, features, labels, clouds)


def build_balanced_testset(
    concept: ConceptId,
    n: int,
    rng: np.random.Generator,
    catalog=None,
    render_cfg: RenderConfig | None = None,
) -> EvalDataset:
    """Exactly n/2 positives and n/2 negatives under the noiseless oracle.

    Negatives come from random sampling; positives from random sampling
    while it keeps finding them, then constructively once negatives fill.
    """
    if n % 2 != 0:
        raise ValueError("test set size must be even")
    catalog = DEFAULT_CATALOG if catalog is None else catalog
    half = n // 2
    buckets = {0: [], 1: []}

    def draw_random():
        if render_cfg is None:
            return sample_scene(catalog, concept, rng), None
        return sample_visible_scene(catalog, concept, rng, render_cfg)

    guard = 0
    while len(buckets[0]) < half and guard < 100 * n:
        scene, cloud = draw_random()
        label = scene_label(concept, scene)
        if len(buckets[label]) < half:
            buckets[label].append((scene, cloud))
        guard += 1
    if len(buckets[0]) < half:
        raise SamplerError(f"could not collect {half} negatives for {concept.value}")
    while len(buckets[1]) < half:
        scene = demo_scene(concept, 1, rng, catalog)
        cloud = None
        if render_cfg is not None:
            cloud = render_or_none(scene, render_cfg, rng)
            if cloud is None:
                continue
        buckets[1].append((scene, cloud))

    # deterministic interleave, then shuffle
    records = []
    for label in (0, 1):
        records.extend((scene, cloud, label) for scene, cloud in buckets[label])
    order = rng.permutation(len(records))
    scenes = [records[i][0] for i in order]
    clouds = [records[i][1] for i in order]
    labels = np.array([records[i][2] for i in order], dtype=np.int64)
    features = np.asarray([privileged_features(s).features for s in scenes])
    return EvalDataset(
        concept=concept,
        scenes=scenes,
        features=features,
        labels=labels,
        clouds=clouds if render_cfg is not None else None,
    )


# --------------------------------------------------------------------------
# Training the perceptual concept
# --------------------------------------------------------------------------


def train_pointset(
    clouds,
    labels,
    cfg: TrainConfig,
    encoder=(64, 128, 256),
    head=(128,),
    model_seed: int | None = None,
    dtype="float64",
) -> PointSetModel:
    model = PointSetModel(
        point_dim=4,
        encoder=encoder,
        head=head,
        seed=cfg.seed if model_seed is None else model_seed,
        dtype=np.dtype(dtype),
    )
    inputs = clouds_matrix(clouds) if not isinstance(clouds, np.ndarray) else clouds
    train_classifier(model, inputs, labels, cfg)
    return model


def train_highdim(bootstrap: BootstrapDataset, cfg: TrainConfig, **net_kwargs) -> PointSetModel:
    return train_pointset(bootstrap.clouds, bootstrap.labels, cfg, **net_kwargs)


def train_baseline_direct(queries: LabeledDataset, cfg: TrainConfig, **net_kwargs) -> PointSetModel:
    """Train the perceptual net directly on human-query clouds, with the
    same trainer the bootstrapped variant uses."""
    if queries.clouds is None:
        raise ValueError("queries carry no rendered clouds")
    return train_pointset(queries.clouds, queries.label_array, cfg, **net_kwargs)


# --------------------------------------------------------------------------
# Pose optimization
# --------------------------------------------------------------------------


@dataclass
class PoseOptProblem:
    """Turn a concept-violating state into a satisfying one, using only the
    rendered observation at optimization time."""

    scene: SceneState
    cloud: PointCloudObservation
    phi_h: PointSetModel
    cem: CemConfig = field(default_factory=lambda: CemConfig(population=32, iterations=20))
    lam: float = POSE_LAMBDA
    bounds_weight: float = 10.0


def optimize_pose(problem: PoseOptProblem) -> tuple[Pose, SceneState]:
    """CEM over 6-dof deltas of the moving block's cloud.

    Cost is (1 - concept probability) of the moved cloud plus a small
    identity-anchored quaternion cost and a soft workspace penalty on the
    moved cloud's world centroid. No ground-truth quantity is evaluated
    inside the loop; the returned scene applies the equivalent world-frame
    motion to the true moving pose for later evaluation.
    """
    scene, cloud, phi_h = problem.scene, problem.cloud, problem.phi_h
    n_anchor = len(cloud.anchor_points)
    anchor_block = np.zeros((n_anchor, 4))
    anchor_block[:, :3] = cloud.anchor_points
    lo_z = scene.table_height - 0.05
    hi_z = scene.table_height + MOVING_Z_MAX + 0.05
    xy = WORKSPACE_HALF_XY + 0.05

    def cost(x):
        positions = x[:, :3]
        quats = quat_from_axis_angle(x[:, 3:])
        moved = batch_transform_moving(cloud.moving_points, positions, quats)
        batch = np.empty((len(x), n_anchor + moved.shape[1], 4))
        batch[:, :n_anchor, :] = anchor_block
        batch[:, n_anchor:, :3] = moved
        batch[:, n_anchor:, 3] = 1.0
        probs = phi_h.forward(batch)
        centroids = camera_to_world(moved.mean(axis=1), scene.camera)
        violation = (
            np.maximum(np.abs(centroids[:, 0]) - xy, 0.0)
            + np.maximum(np.abs(centroids[:, 1]) - xy, 0.0)
            + np.maximum(lo_z - centroids[:, 2], 0.0)
            + np.maximum(centroids[:, 2] - hi_z, 0.0)
        )
        reg = quat_cost(quats, IDENTITY_QUAT, problem.lam)
        return (1.0 - probs) + reg + problem.bounds_weight * violation

    cfg = replace(problem.cem, init_std=np.array([0.15, 0.15, 0.1, 0.6, 0.6, 0.6]))
    best, _ = cem_minimize(cost, np.zeros(6), cfg)
    delta = Pose(best[:3], quat_from_axis_angle(best[3:]))
    q_world, t_world = delta_to_world_motion(cloud, scene.camera, delta)
    optimized = scene.with_moving_pose(
        apply_world_motion(scene.moving.pose, q_world, t_world)
    )
    return delta, optimized


def sample_zero_value_scene(concept, rng, catalog, render_cfg, max_tries=2000):
    """A renderable state whose ground-truth concept value is exactly 0."""
    for _ in range(max_tries):
        scene, cloud = sample_visible_scene(catalog, concept, rng, render_cfg)
        if concept_value(concept, scene) == 0.0:
            return scene, cloud
    raise SamplerError(f"no zero-value state for {concept.value} after {max_tries} draws")


def optimization_accuracy(
    phi_h: PointSetModel,
    concept: ConceptId,
    n_problems: int,
    rng: np.random.Generator,
    catalog=None,
    render_cfg: RenderConfig | None = None,
    cem: CemConfig | None = None,
    lam: float = POSE_LAMBDA,
) -> float:
    """Fraction of initially violating states optimized into true positives."""
    catalog = DEFAULT_CATALOG if catalog is None else catalog
    render_cfg = render_cfg or RenderConfig()
    base_cem = cem or CemConfig(population=32, iterations=20)
    hits = 0
    for k in range(n_problems):
        scene, cloud = sample_zero_value_scene(concept, rng, catalog, render_cfg)
        problem = PoseOptProblem(
            scene,
            cloud,
            phi_h,
            cem=replace(base_cem, seed=int(rng.integers(np.iinfo(np.int64).max))),
            lam=lam,
        )
        _, optimized = optimize_pose(problem)
        hits += scene_label(concept, optimized)
    return hits / n_problems


# --------------------------------------------------------------------------
# Convenience wrappers used by experiments and the CLI
# --------------------------------------------------------------------------


def transform_then_label(concept, scene, cloud, delta) -> int:
    """Ground-truth label after applying a cloud-frame delta to the state."""
    q_world, t_world = delta_to_world_motion(cloud, scene.camera, delta)
    moved = scene.with_moving_pose(apply_world_motion(scene.moving.pose, q_world, t_world))
    return scene_label(concept, moved)
