"""Ground-truth concept values and the simulated human that answers queries.

Each concept maps a scene to [0, 1] by measuring an angle or distance and
passing it through a linear ramp that hits zero at the concept's cutoff.
A state is a positive example exactly when its value is strictly inside
the cutoff (value > 0).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .concepts import CONCEPT_SPECS, FEATURE_ANSWER_TABLE, ConceptId, FeatureAnswers
from .errors import ApplicabilityError, SamplerError
from .geometry import (
    Pose,
    angle_between,
    projected_aabb_intersection,
    projected_rect,
    quat_from_axis_angle,
    quat_mul,
    quat_rotate,
    rect_area,
)
from .scene import SceneState, in_workspace, objects_interpenetrate, sample_scene
from .shapes import DEFAULT_CATALOG

WORLD_Z = np.array([0.0, 0.0, 1.0])
LOCAL_X = np.array([1.0, 0.0, 0.0])
LOCAL_Z = np.array([0.0, 0.0, 1.0])

_MAX_CONSTRUCT_TRIES = 10000


def ramp(x: float, cutoff: float) -> float:
    """Linear falloff from 1 at x=0 to 0 at the cutoff, clamped to [0, 1]."""
    return float(np.clip(1.0 - x / cutoff, 0.0, 1.0))


def check_applicable(concept: ConceptId, scene: SceneState) -> None:
    spec = CONCEPT_SPECS[concept]
    if spec.anchor_flag is not None and not getattr(scene.anchor.spec, spec.anchor_flag):
        raise ApplicabilityError(
            f"{concept.value}: anchor {scene.anchor.spec.shape_id} lacks {spec.anchor_flag}"
        )
    if spec.moving_flag is not None and not getattr(scene.moving.spec, spec.moving_flag):
        raise ApplicabilityError(
            f"{concept.value}: moving {scene.moving.spec.shape_id} lacks {spec.moving_flag}"
        )


def concept_value(concept: ConceptId, scene: SceneState) -> float:
    """Normalized ground-truth value of the relation in [0, 1]."""
    check_applicable(concept, scene)
    pa = scene.anchor.pose
    pm = scene.moving.pose
    diff = pm.position - pa.position
    cutoff = CONCEPT_SPECS[concept].cutoff

    if concept is ConceptId.ABOVE:
        return ramp(float(angle_between(diff, WORLD_Z)), cutoff)
    if concept is ConceptId.ABOVE_BB:
        if pm.position[2] <= pa.position[2]:
            return 0.0
        inter = projected_aabb_intersection(
            pa, scene.anchor.spec.half_extents, pm, scene.moving.spec.half_extents
        )
        area_m = rect_area(*projected_rect(pm, scene.moving.spec.half_extents))
        return float(inter / area_m)
    if concept is ConceptId.NEAR:
        return ramp(float(np.linalg.norm(diff)), cutoff)
    if concept is ConceptId.UPRIGHT:
        mz = quat_rotate(pm.orientation, LOCAL_Z)
        return ramp(float(angle_between(mz, WORLD_Z)), cutoff)
    if concept is ConceptId.ALIGNED_HORIZ:
        ax = quat_rotate(pa.orientation, LOCAL_X)
        mx = quat_rotate(pm.orientation, LOCAL_X)
        return ramp(float(angle_between(ax, mx)), cutoff)
    if concept is ConceptId.ALIGNED_VERT:
        az = quat_rotate(pa.orientation, LOCAL_Z)
        mz = quat_rotate(pm.orientation, LOCAL_Z)
        return ramp(float(angle_between(az, mz)), cutoff)
    if concept in (ConceptId.FORWARD, ConceptId.FRONT):
        ax = quat_rotate(pa.orientation, LOCAL_X)
        return ramp(float(angle_between(ax, diff)), cutoff)
    if concept is ConceptId.TOP:
        az = quat_rotate(pa.orientation, LOCAL_Z)
        return ramp(float(angle_between(az, diff)), cutoff)
    raise ValueError(f"unknown concept {concept}")


def binarize(value: float) -> int:
    """1 for any state strictly inside the cutoff, else 0."""
    return 1 if value > 0.0 else 0


def scene_label(concept: ConceptId, scene: SceneState) -> int:
    return binarize(concept_value(concept, scene))


def answer_feature_queries(concept: ConceptId) -> FeatureAnswers:
    """Fixed per-concept answers, read off each formula's dependencies."""
    return FEATURE_ANSWER_TABLE[concept]


@dataclass
class SimulatedHuman:
    """Oracle labeler with independent label-flip noise.

    Holds its own rng so the noise stream is reproducible; not safe to
    share across threads without external locking.
    """

    concept: ConceptId
    noise_level: float = 0.0
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))
    catalog: list = field(default_factory=lambda: list(DEFAULT_CATALOG))

    def _noise_channel(self, label: int) -> int:
        # one rng draw per query, regardless of the noise level
        flip = self.rng.random() < self.noise_level
        return 1 - label if flip else label

    def answer_label_query(self, scene: SceneState) -> int:
        return self._noise_channel(scene_label(self.concept, scene))

    def answer_demo_query(
        self, desired_label: int, rng: np.random.Generator
    ) -> tuple[SceneState, int]:
        """Construct a state whose noiseless label is `desired_label`.

        Positives are built by inverting the concept formula; negatives by
        rejection sampling. The returned label passes the noise channel.
        """
        scene = demo_scene(self.concept, desired_label, rng, self.catalog)
        return scene, self._noise_channel(desired_label)


# --------------------------------------------------------------------------
# Constructive demo sampling
# --------------------------------------------------------------------------


def _unit_from_cone(axis: np.ndarray, max_angle_deg: float, rng) -> np.ndarray:
    """Uniform-ish direction within max_angle of axis (angle uniform)."""
    angle = np.radians(rng.uniform(0.0, max_angle_deg))
    # orthonormal basis around axis
    helper = np.array([1.0, 0.0, 0.0])
    if abs(axis @ helper) > 0.9:
        helper = np.array([0.0, 1.0, 0.0])
    u = np.cross(axis, helper)
    u /= np.linalg.norm(u)
    v = np.cross(axis, u)
    phi = rng.uniform(0.0, 2.0 * np.pi)
    perp = np.cos(phi) * u + np.sin(phi) * v
    return np.cos(angle) * axis + np.sin(angle) * perp


def _tilted_quat(max_tilt_deg: float, rng) -> np.ndarray:
    """Random orientation whose local z stays within max_tilt of world z."""
    tilt_axis = np.array([np.cos(a := rng.uniform(0, 2 * np.pi)), np.sin(a), 0.0])
    tilt = np.radians(rng.uniform(0.0, max_tilt_deg))
    spin = quat_from_axis_angle(np.array([0.0, 0.0, rng.uniform(0, 2 * np.pi)]))
    return quat_mul(quat_from_axis_angle(tilt_axis * tilt), spin)


def _positive_moving_state(concept: ConceptId, scene: SceneState, rng) -> SceneState:
    """One constructive attempt at a positive placement; may leave bounds."""
    pa = scene.anchor.pose
    pos = scene.moving.pose.position
    quat = scene.moving.pose.orientation
    margin = 0.999

    if concept is ConceptId.ABOVE:
        direction = _unit_from_cone(WORLD_Z, 45.0 * margin, rng)
        pos = pa.position + direction * rng.uniform(0.05, 0.45)
    elif concept is ConceptId.ABOVE_BB:
        lo, hi = projected_rect(pa, scene.anchor.spec.half_extents)
        pos = np.array(
            [
                rng.uniform(lo[0], hi[0]),
                rng.uniform(lo[1], hi[1]),
                pa.position[2] + rng.uniform(0.02, 0.25),
            ]
        )
    elif concept is ConceptId.NEAR:
        direction = _unit_from_cone(WORLD_Z, 180.0, rng)
        pos = pa.position + direction * (0.3 * margin) * rng.uniform(0.1, 1.0) ** (1 / 3)
    elif concept is ConceptId.UPRIGHT:
        quat = _tilted_quat(45.0 * margin, rng)
    elif concept in (ConceptId.ALIGNED_HORIZ, ConceptId.ALIGNED_VERT):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        wobble = quat_from_axis_angle(axis * np.radians(rng.uniform(0.0, 45.0 * margin)))
        local = LOCAL_X if concept is ConceptId.ALIGNED_HORIZ else LOCAL_Z
        spin = quat_from_axis_angle(local * rng.uniform(0, 2 * np.pi))
        quat = quat_mul(quat_mul(pa.orientation, wobble), spin)
    elif concept in (ConceptId.FORWARD, ConceptId.FRONT, ConceptId.TOP):
        spec = CONCEPT_SPECS[concept]
        local = LOCAL_Z if concept is ConceptId.TOP else LOCAL_X
        axis = quat_rotate(pa.orientation, local)
        direction = _unit_from_cone(axis, spec.cutoff * margin, rng)
        pos = pa.position + direction * rng.uniform(0.05, 0.4)
    else:
        raise ValueError(f"unknown concept {concept}")

    return scene.with_moving_pose(Pose(pos, quat))


def demo_scene(concept: ConceptId, desired_label: int, rng, catalog=None) -> SceneState:
    """Scene whose noiseless label equals desired_label, inside the workspace."""
    catalog = DEFAULT_CATALOG if catalog is None else catalog
    for _ in range(_MAX_CONSTRUCT_TRIES):
        base = sample_scene(catalog, concept, rng)
        if desired_label == 0:
            if scene_label(concept, base) == 0:
                return base
            continue
        candidate = _positive_moving_state(concept, base, rng)
        if not in_workspace(
            candidate.moving.pose.position, candidate.moving.spec, candidate.table_height
        ):
            continue
        if objects_interpenetrate(candidate):
            continue
        if scene_label(concept, candidate) == 1:
            return candidate
    raise SamplerError(
        f"could not construct a label-{desired_label} state for {concept.value}"
    )
