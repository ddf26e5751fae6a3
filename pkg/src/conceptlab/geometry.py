"""Poses, quaternions, and the box/angle primitives the concept formulas use.

Quaternions are scalar-last (x, y, z, w). All quaternion helpers broadcast
over leading dimensions, so a (B, 4) array of rotations works everywhere a
single (4,) quaternion does.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, InvalidQuaternionError

QUAT_NORM_TOL = 1e-6
IDENTITY_QUAT = np.array([0.0, 0.0, 0.0, 1.0])


def quat_normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def quat_canonical(q: np.ndarray) -> np.ndarray:
    """Flip sign so w >= 0 (q and -q are the same rotation)."""
    q = np.asarray(q, dtype=np.float64)
    return np.where(q[..., 3:4] < 0.0, -q, q)


def check_unit_quat(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    err = np.abs(np.linalg.norm(q, axis=-1) - 1.0)
    if np.any(err > QUAT_NORM_TOL):
        raise InvalidQuaternionError(
            f"quaternion norm off by {float(np.max(err)):.3g} (> {QUAT_NORM_TOL})"
        )
    return q


def quat_mul(q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
    """Hamilton product q1 * q2, scalar-last, broadcasting."""
    q1 = np.asarray(q1, dtype=np.float64)
    q2 = np.asarray(q2, dtype=np.float64)
    x1, y1, z1, w1 = q1[..., 0], q1[..., 1], q1[..., 2], q1[..., 3]
    x2, y2, z2, w2 = q2[..., 0], q2[..., 1], q2[..., 2], q2[..., 3]
    return np.stack(
        [
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        ],
        axis=-1,
    )


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    return q * np.array([-1.0, -1.0, -1.0, 1.0])


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate vector(s) v by unit quaternion(s) q; preserves vector norm."""
    q = check_unit_quat(q)
    v = np.asarray(v, dtype=np.float64)
    qv = q[..., :3]
    w = q[..., 3:4]
    t = 2.0 * np.cross(qv, v)
    return v + w * t + np.cross(qv, t)


def quat_from_axis_angle(rotvec: np.ndarray) -> np.ndarray:
    """Exponential map from an axis-angle vector (angle = vector norm)."""
    rotvec = np.asarray(rotvec, dtype=np.float64)
    angle = np.linalg.norm(rotvec, axis=-1, keepdims=True)
    half = 0.5 * angle
    # sin(x)/x with a series fallback near zero
    small = angle < 1e-12
    k = np.where(small, 0.5 - angle**2 / 48.0, np.sin(half) / np.where(small, 1.0, angle))
    xyz = rotvec * k
    w = np.cos(half)
    return np.concatenate([xyz, w], axis=-1)


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """Rotation matrix (..., 3, 3) for unit quaternion(s)."""
    q = check_unit_quat(q)
    x, y, z, w = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    row0 = np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)], axis=-1)
    row1 = np.stack([2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)], axis=-1)
    row2 = np.stack([2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)], axis=-1)
    return np.stack([row0, row1, row2], axis=-2)


def random_quat(rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Uniform random rotation(s): normalized 4D gaussians, canonicalized."""
    shape = (4,) if size is None else (size, 4)
    q = rng.normal(size=shape)
    return quat_canonical(quat_normalize(q))


def yaw_quat(yaw: float) -> np.ndarray:
    """Rotation about the world z axis by `yaw` radians."""
    return np.array([0.0, 0.0, np.sin(yaw / 2.0), np.cos(yaw / 2.0)])


@dataclass(frozen=True)
class Pose:
    """Rigid transform: rotate by `orientation` then translate by `position`.

    The quaternion is normalized and sign-canonicalized (w >= 0) at
    construction; inputs whose norm is off by more than 1e-6 are rejected.
    """

    position: np.ndarray
    orientation: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=np.float64).reshape(3)
        q = np.asarray(self.orientation, dtype=np.float64).reshape(4)
        check_unit_quat(q)
        q = quat_canonical(quat_normalize(q))
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "orientation", q)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.zeros(3), IDENTITY_QUAT.copy())

    def compose(self, other: "Pose") -> "Pose":
        """self applied after other's frame: world_from_a * a_from_b."""
        return Pose(
            self.position + quat_rotate(self.orientation, other.position),
            quat_mul(self.orientation, other.orientation),
        )

    def inverse(self) -> "Pose":
        qinv = quat_conjugate(self.orientation)
        return Pose(-quat_rotate(qinv, self.position), qinv)

    def transform_points(self, points: np.ndarray) -> np.ndarray:
        return quat_rotate(self.orientation, np.asarray(points, dtype=np.float64)) + self.position

    def rotation_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.orientation)


@dataclass(frozen=True)
class ObbExtents:
    """Per-axis half extents of an object's local-frame bounding box."""

    half_extents: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.half_extents, dtype=np.float64).reshape(3)
        if not np.all(h > 0.0):
            raise DegenerateInputError(f"half extents must be positive, got {h}")
        object.__setattr__(self, "half_extents", h)


def relative_pose(anchor: Pose, moving: Pose) -> Pose:
    """Express `moving` in the anchor's frame: anchor.compose(result) == moving."""
    qinv = quat_conjugate(anchor.orientation)
    return Pose(
        quat_rotate(qinv, moving.position - anchor.position),
        quat_mul(qinv, moving.orientation),
    )


def angle_between(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Angle between vectors in degrees, in [0, 180]. Broadcasts."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu = np.linalg.norm(u, axis=-1)
    nv = np.linalg.norm(v, axis=-1)
    if np.any(nu <= 1e-9) or np.any(nv <= 1e-9):
        raise DegenerateInputError("angle_between got a near-zero vector")
    cosang = np.sum(u * v, axis=-1) / (nu * nv)
    return np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0)))


_CORNER_SIGNS = np.array(
    [[sx, sy, sz] for sx in (-1.0, 1.0) for sy in (-1.0, 1.0) for sz in (-1.0, 1.0)]
)


def projected_rect(pose: Pose, extents: ObbExtents) -> tuple[np.ndarray, np.ndarray]:
    """World-xy axis-aligned rectangle enclosing the posed box's 8 corners.

    Returns (min_xy, max_xy).
    """
    corners = pose.transform_points(_CORNER_SIGNS * extents.half_extents)
    xy = corners[:, :2]
    return xy.min(axis=0), xy.max(axis=0)


def rect_area(lo: np.ndarray, hi: np.ndarray) -> float:
    return float((hi[0] - lo[0]) * (hi[1] - lo[1]))


def projected_aabb_intersection(
    pose_a: Pose, ext_a: ObbExtents, pose_b: Pose, ext_b: ObbExtents
) -> float:
    """Intersection area of the two boxes' world-xy enclosing rectangles."""
    lo_a, hi_a = projected_rect(pose_a, ext_a)
    lo_b, hi_b = projected_rect(pose_b, ext_b)
    w = min(hi_a[0], hi_b[0]) - max(lo_a[0], lo_b[0])
    h = min(hi_a[1], hi_b[1]) - max(lo_a[1], lo_b[1])
    if w <= 0.0 or h <= 0.0:
        return 0.0
    return float(w * h)


def quat_cost(q1: np.ndarray, q2: np.ndarray, lam: float) -> np.ndarray:
    """Orientation cost lam * (1 - |<q1, q2>|); zero iff same rotation.

    The inner product sign is canonicalized so q and -q give the same cost.
    Broadcasts over leading dimensions.
    """
    q1 = check_unit_quat(q1)
    q2 = check_unit_quat(q2)
    inner = np.abs(np.sum(q1 * q2, axis=-1))
    return lam * (1.0 - np.minimum(inner, 1.0))
