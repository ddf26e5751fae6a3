"""Scene synthesis and the privileged (low-dimensional) observation.

The workspace is a tabletop patch: x, y in [-HALF_XY, HALF_XY] with the
table surface at z = table_height. The anchor rests on the table with a
random yaw; the moving object floats anywhere in the workspace volume with
a uniform random orientation. The camera sits on a ring around the table
and looks at the workspace center.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .concepts import CONCEPT_SPECS, ConceptId, FeatureAnswers
from .errors import ConfigurationError
from .geometry import (
    Pose,
    quat_canonical,
    quat_conjugate,
    quat_mul,
    quat_normalize,
    quat_rotate,
    random_quat,
    yaw_quat,
)
from .shapes import ObjectSpec

WORKSPACE_HALF_XY = 0.35
MOVING_Z_MAX = 0.36
CAMERA_RADIUS = (1.0, 1.5)
CAMERA_HEIGHT = (0.4, 0.8)

FEATURE_DIM = 30

# feature vector layout: [anchor pos, anchor quat, moving pos, moving quat,
# relative pos, relative quat, position difference, anchor half extents,
# moving half extents]
_ANCHOR_POSE = slice(0, 7)
_MOVING_POSE = slice(7, 14)
_RELATIVE_POSE = slice(14, 21)
_POSITION_DIFF = slice(21, 24)
_ANCHOR_EXTENTS = slice(24, 27)
_MOVING_EXTENTS = slice(27, 30)


@dataclass(frozen=True)
class PlacedObject:
    spec: ObjectSpec
    pose: Pose


@dataclass(frozen=True)
class SceneState:
    """Full simulator state: two placed objects plus the camera."""

    anchor: PlacedObject
    moving: PlacedObject
    camera: Pose
    table_height: float = 0.0

    def with_moving_pose(self, pose: Pose) -> "SceneState":
        return replace(self, moving=PlacedObject(self.moving.spec, pose))


@dataclass(frozen=True)
class PrivilegedObservation:
    """30-dim privileged feature vector with an active-dimension mask."""

    features: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "features", np.asarray(self.features, dtype=np.float64))
        object.__setattr__(self, "mask", np.asarray(self.mask, dtype=bool))


def applicable_specs(catalog, concept: ConceptId):
    """(anchor candidates, moving candidates) for a concept's affordances."""
    spec = CONCEPT_SPECS[concept]
    anchors = [s for s in catalog if spec.anchor_flag is None or getattr(s, spec.anchor_flag)]
    movings = [s for s in catalog if spec.moving_flag is None or getattr(s, spec.moving_flag)]
    if not anchors or not movings:
        raise ConfigurationError(f"catalog has no applicable objects for {concept.value}")
    return anchors, movings


def look_at_pose(position: np.ndarray, target: np.ndarray) -> Pose:
    """Camera pose at `position` with +z toward `target` and +y pointing down."""
    position = np.asarray(position, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - position
    forward = forward / np.linalg.norm(forward)
    right = np.cross(forward, np.array([0.0, 0.0, 1.0]))
    right = right / np.linalg.norm(right)
    down = np.cross(forward, right)
    rot = np.stack([right, down, forward], axis=1)
    return Pose(position, _matrix_to_quat(rot))


def _matrix_to_quat(m: np.ndarray) -> np.ndarray:
    """Rotation matrix to scalar-last quaternion (Shepperd's branching)."""
    t = np.trace(m)
    if t > 0:
        s = np.sqrt(t + 1.0) * 2.0
        w = 0.25 * s
        x = (m[2, 1] - m[1, 2]) / s
        y = (m[0, 2] - m[2, 0]) / s
        z = (m[1, 0] - m[0, 1]) / s
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
        w = (m[2, 1] - m[1, 2]) / s
        x = 0.25 * s
        y = (m[0, 1] + m[1, 0]) / s
        z = (m[0, 2] + m[2, 0]) / s
    elif m[1, 1] > m[2, 2]:
        s = np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
        w = (m[0, 2] - m[2, 0]) / s
        x = (m[0, 1] + m[1, 0]) / s
        y = 0.25 * s
        z = (m[1, 2] + m[2, 1]) / s
    else:
        s = np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
        w = (m[1, 0] - m[0, 1]) / s
        x = (m[0, 2] + m[2, 0]) / s
        y = (m[1, 2] + m[2, 1]) / s
        z = 0.25 * s
    return quat_canonical(quat_normalize(np.array([x, y, z, w])))


def workspace_center(table_height: float = 0.0) -> np.ndarray:
    return np.array([0.0, 0.0, table_height + MOVING_Z_MAX / 2.0])


def sample_camera(rng: np.random.Generator, table_height: float = 0.0) -> Pose:
    psi = rng.uniform(0.0, 2.0 * np.pi)
    radius = rng.uniform(*CAMERA_RADIUS)
    height = rng.uniform(*CAMERA_HEIGHT)
    position = np.array(
        [radius * np.cos(psi), radius * np.sin(psi), table_height + height]
    )
    return look_at_pose(position, workspace_center(table_height))


def sample_anchor_pose(spec: ObjectSpec, rng: np.random.Generator, table_height=0.0) -> Pose:
    x, y = rng.uniform(-WORKSPACE_HALF_XY, WORKSPACE_HALF_XY, 2)
    yaw = rng.uniform(0.0, 2.0 * np.pi)
    return Pose(np.array([x, y, table_height + spec.resting_height]), yaw_quat(yaw))


def sample_moving_pose(spec: ObjectSpec, rng: np.random.Generator, table_height=0.0) -> Pose:
    x, y = rng.uniform(-WORKSPACE_HALF_XY, WORKSPACE_HALF_XY, 2)
    z = rng.uniform(table_height + spec.resting_height, table_height + MOVING_Z_MAX)
    return Pose(np.array([x, y, z]), random_quat(rng))


def moving_z_bounds(spec: ObjectSpec, table_height: float = 0.0) -> tuple[float, float]:
    return table_height + spec.resting_height, table_height + MOVING_Z_MAX


def in_workspace(position: np.ndarray, spec: ObjectSpec, table_height: float = 0.0) -> bool:
    lo, hi = moving_z_bounds(spec, table_height)
    return bool(
        abs(position[0]) <= WORKSPACE_HALF_XY
        and abs(position[1]) <= WORKSPACE_HALF_XY
        and lo <= position[2] <= hi
    )


def _world_aabb(pose: Pose, spec: ObjectSpec):
    signs = np.array(
        [[sx, sy, sz] for sx in (-1.0, 1.0) for sy in (-1.0, 1.0) for sz in (-1.0, 1.0)]
    )
    corners = pose.transform_points(signs * spec.half_extents.half_extents)
    return corners.min(axis=0), corners.max(axis=0)


_PENETRATION_SLACK = 0.01


def objects_interpenetrate(scene: "SceneState") -> bool:
    """Conservative world-box test: true when the two objects' enclosing
    boxes overlap by more than a small slack on every axis (states a
    physical simulator could not produce)."""
    lo_a, hi_a = _world_aabb(scene.anchor.pose, scene.anchor.spec)
    lo_m, hi_m = _world_aabb(scene.moving.pose, scene.moving.spec)
    overlap = np.minimum(hi_a, hi_m) - np.maximum(lo_a, lo_m)
    return bool(np.all(overlap > _PENETRATION_SLACK))


def sample_scene(
    catalog, concept: ConceptId, rng: np.random.Generator, table_height: float = 0.0
) -> SceneState:
    """Draw a random state: objects from the concept's applicable subsets,
    anchor resting on the table, moving object anywhere in the volume
    except inside the anchor."""
    anchors, movings = applicable_specs(catalog, concept)
    anchor_spec = anchors[rng.integers(len(anchors))]
    moving_spec = movings[rng.integers(len(movings))]
    anchor_pose = sample_anchor_pose(anchor_spec, rng, table_height)
    camera = sample_camera(rng, table_height)
    while True:
        moving_pose = sample_moving_pose(moving_spec, rng, table_height)
        scene = SceneState(
            anchor=PlacedObject(anchor_spec, anchor_pose),
            moving=PlacedObject(moving_spec, moving_pose),
            camera=camera,
            table_height=table_height,
        )
        if not objects_interpenetrate(scene):
            return scene


# --------------------------------------------------------------------------
# Privileged observation (the transformation G)
# --------------------------------------------------------------------------


def batch_privileged_features(
    anchor_pose: Pose,
    anchor_extents: np.ndarray,
    moving_positions: np.ndarray,
    moving_quats: np.ndarray,
    moving_extents: np.ndarray,
) -> np.ndarray:
    """Feature matrix (B, 30) for many moving poses against one anchor.

    Used by the confusion-query optimizer, which scores whole CEM
    populations at once.
    """
    moving_positions = np.atleast_2d(np.asarray(moving_positions, dtype=np.float64))
    moving_quats = np.atleast_2d(np.asarray(moving_quats, dtype=np.float64))
    b = moving_positions.shape[0]
    qa_inv = quat_conjugate(anchor_pose.orientation)
    rel_pos = quat_rotate(
        np.broadcast_to(qa_inv, (b, 4)), moving_positions - anchor_pose.position
    )
    rel_quat = quat_canonical(quat_mul(qa_inv, moving_quats))
    out = np.empty((b, FEATURE_DIM))
    out[:, 0:3] = anchor_pose.position
    out[:, 3:7] = anchor_pose.orientation
    out[:, 7:10] = moving_positions
    out[:, 10:14] = quat_canonical(moving_quats)
    out[:, 14:17] = rel_pos
    out[:, 17:21] = rel_quat
    out[:, 21:24] = moving_positions - anchor_pose.position
    out[:, 24:27] = anchor_extents
    out[:, 27:30] = moving_extents
    return out


def privileged_features(scene: SceneState) -> PrivilegedObservation:
    """The 30-dim privileged vector for a scene, all dimensions active."""
    feats = batch_privileged_features(
        scene.anchor.pose,
        scene.anchor.spec.half_extents.half_extents,
        scene.moving.pose.position,
        scene.moving.pose.orientation,
        scene.moving.spec.half_extents.half_extents,
    )[0]
    return PrivilegedObservation(feats, np.ones(FEATURE_DIM, dtype=bool))


def feature_mask_from_answers(answers: FeatureAnswers) -> np.ndarray:
    """Active-dimension mask implied by the three feature-query answers."""
    mask = np.ones(FEATURE_DIM, dtype=bool)
    if answers.f1_single_object:
        mask[_ANCHOR_POSE] = False
        mask[_RELATIVE_POSE] = False
        mask[_POSITION_DIFF] = False
        mask[_ANCHOR_EXTENTS] = False
    if answers.f2_frame == "relative":
        mask[_ANCHOR_POSE] = False
        mask[_MOVING_POSE] = False
    else:
        mask[_RELATIVE_POSE] = False
        mask[_POSITION_DIFF] = False
    if not answers.f3_sizes_matter:
        mask[_ANCHOR_EXTENTS] = False
        mask[_MOVING_EXTENTS] = False
    return mask


def apply_feature_mask(
    obs: PrivilegedObservation, answers: FeatureAnswers
) -> PrivilegedObservation:
    """Zero out feature groups the human said don't matter."""
    mask = obs.mask & feature_mask_from_answers(answers)
    return PrivilegedObservation(np.where(mask, obs.features, 0.0), mask)
