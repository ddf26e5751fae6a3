"""Point-cloud rendering: the sensor transformation from state to observation.

Candidate surface points from both objects are splatted through a pinhole
camera onto a depth grid; the nearest point per pixel wins (occlusion
across both objects; the table plane is handled analytically as an
occluder). Survivors are resampled with replacement to a fixed count per
object and returned in the camera frame with a segment channel.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .concepts import ConceptId
from .errors import OcclusionRejectError, SamplerError
from .geometry import Pose, quat_conjugate, quat_mul, quat_rotate, quat_to_matrix
from .scene import SceneState, sample_scene


@dataclass(frozen=True)
class RenderConfig:
    width: int = 160
    height: int = 120
    fov_y_deg: float = 60.0
    points_per_object: int = 256
    candidate_points: int = 4096
    min_visible: int = 20
    z_near: float = 0.05

    @property
    def focal(self) -> float:
        return (self.height / 2.0) / np.tan(np.radians(self.fov_y_deg) / 2.0)


@dataclass(frozen=True)
class PointCloudObservation:
    """N camera-frame points per object; segment 0 = anchor, 1 = moving."""

    anchor_points: np.ndarray
    moving_points: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "anchor_points", np.asarray(self.anchor_points, dtype=np.float64)
        )
        object.__setattr__(
            self, "moving_points", np.asarray(self.moving_points, dtype=np.float64)
        )

    def combined(self) -> np.ndarray:
        """(2N, 4) array of xyz plus the segment channel, anchor block first."""
        n_a = len(self.anchor_points)
        n_m = len(self.moving_points)
        out = np.zeros((n_a + n_m, 4))
        out[:n_a, :3] = self.anchor_points
        out[n_a:, :3] = self.moving_points
        out[n_a:, 3] = 1.0
        return out


def world_to_camera(points: np.ndarray, camera: Pose) -> np.ndarray:
    rot = quat_to_matrix(camera.orientation)
    return (np.asarray(points, dtype=np.float64) - camera.position) @ rot


def camera_to_world(points: np.ndarray, camera: Pose) -> np.ndarray:
    rot = quat_to_matrix(camera.orientation)
    return np.asarray(points, dtype=np.float64) @ rot.T + camera.position


def project_pixels(cam_points: np.ndarray, cfg: RenderConfig):
    """Pixel indices and validity for camera-frame points.

    Returns (pixel_flat_index, depth, valid). Points behind the near plane
    or outside the image are invalid.
    """
    x, y, z = cam_points[:, 0], cam_points[:, 1], cam_points[:, 2]
    valid = z > cfg.z_near
    zs = np.where(valid, z, 1.0)
    u = np.floor(cfg.focal * x / zs + cfg.width / 2.0).astype(np.int64)
    v = np.floor(cfg.focal * y / zs + cfg.height / 2.0).astype(np.int64)
    valid &= (u >= 0) & (u < cfg.width) & (v >= 0) & (v < cfg.height)
    return v * cfg.width + u, z, valid


def _table_occluded(points_world: np.ndarray, camera: Pose, table_height: float) -> np.ndarray:
    """True where the camera ray crosses the table plane before the point."""
    cz = camera.position[2]
    pz = points_world[:, 2]
    denom = cz - pz
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (cz - table_height) / denom
    return (denom != 0.0) & (t > 0.0) & (t < 1.0)


def zbuffer_survivors(scene: SceneState, cfg: RenderConfig, rng: np.random.Generator):
    """Candidate splat and per-pixel depth test over both objects.

    Returns (cam_points_anchor, pixels_anchor, cam_points_moving,
    pixels_moving) for the surviving (visible) candidates.
    """
    clouds_world = []
    for placed in (scene.anchor, scene.moving):
        local = placed.spec.sample_surface(cfg.candidate_points, rng)
        clouds_world.append(placed.pose.transform_points(local))
    n_a = len(clouds_world[0])
    world = np.concatenate(clouds_world, axis=0)
    seg = np.zeros(len(world), dtype=np.int64)
    seg[n_a:] = 1

    cam = world_to_camera(world, scene.camera)
    pix, depth, valid = project_pixels(cam, cfg)
    valid &= ~_table_occluded(world, scene.camera, scene.table_height)

    idx = np.flatnonzero(valid)
    order = idx[np.argsort(depth[idx], kind="stable")]
    _, first = np.unique(pix[order], return_index=True)
    winners = order[first]

    survivors = []
    for s in (0, 1):
        w = winners[seg[winners] == s]
        survivors.append((cam[w], pix[w]))
    return survivors[0][0], survivors[0][1], survivors[1][0], survivors[1][1]


def render_segmented_cloud(
    scene: SceneState, cfg: RenderConfig, rng: np.random.Generator
) -> PointCloudObservation:
    """Render both objects, raising OcclusionRejectError if either is
    nearly invisible. Deterministic given the rng state."""
    pts_a, _, pts_m, _ = zbuffer_survivors(scene, cfg, rng)
    if len(pts_a) < cfg.min_visible or len(pts_m) < cfg.min_visible:
        raise OcclusionRejectError(
            f"visible points anchor={len(pts_a)} moving={len(pts_m)} "
            f"< min_visible={cfg.min_visible}"
        )
    n = cfg.points_per_object
    take_a = pts_a[rng.integers(0, len(pts_a), n)]
    take_m = pts_m[rng.integers(0, len(pts_m), n)]
    return PointCloudObservation(take_a, take_m)


def sample_visible_scene(
    catalog,
    concept: ConceptId,
    rng: np.random.Generator,
    cfg: RenderConfig,
    max_tries: int = 100,
):
    """Draw random scenes until one renders with both objects visible."""
    for _ in range(max_tries):
        scene = sample_scene(catalog, concept, rng)
        try:
            return scene, render_segmented_cloud(scene, cfg, rng)
        except OcclusionRejectError:
            continue
    raise SamplerError(f"no visible scene after {max_tries} draws")


def render_or_none(scene: SceneState, cfg: RenderConfig, rng: np.random.Generator):
    try:
        return render_segmented_cloud(scene, cfg, rng)
    except OcclusionRejectError:
        return None


# --------------------------------------------------------------------------
# Rigid motion of the moving block (used by pose optimization)
# --------------------------------------------------------------------------


def transform_moving_cloud(obs: PointCloudObservation, delta: Pose) -> PointCloudObservation:
    """Rotate the moving block about its centroid, then translate it.

    The anchor block is untouched. The inverse of a delta under this action
    is Pose(-delta.position, conjugate(delta.orientation)).
    """
    centroid = obs.moving_points.mean(axis=0)
    moved = (
        quat_rotate(delta.orientation, obs.moving_points - centroid)
        + centroid
        + delta.position
    )
    return replace(obs, moving_points=moved)


def batch_transform_moving(
    moving_points: np.ndarray, positions: np.ndarray, quats: np.ndarray
) -> np.ndarray:
    """Apply B centroid-anchored deltas to one moving block: (B, N, 3)."""
    centroid = moving_points.mean(axis=0)
    centered = moving_points - centroid
    rotated = quat_rotate(quats[:, None, :], centered[None, :, :])
    return rotated + centroid + positions[:, None, :]


def delta_to_world_motion(
    obs: PointCloudObservation, camera: Pose, delta: Pose
) -> tuple[np.ndarray, np.ndarray]:
    """World-frame rigid motion (q, t) equivalent to a camera-frame delta.

    transform_moving_cloud acts on camera-frame points as
    x -> R x + (c + t - R c); conjugating by the camera pose gives the
    world-frame motion to apply to the true object pose.
    """
    centroid = obs.moving_points.mean(axis=0)
    b_cam = centroid + delta.position - quat_rotate(delta.orientation, centroid)
    q_world = quat_mul(camera.orientation, quat_mul(delta.orientation, quat_conjugate(camera.orientation)))
    b_world = (
        camera_to_world(b_cam[None, :], camera)[0]
        - quat_rotate(q_world, camera.position)
    )
    return q_world, b_world


def apply_world_motion(pose: Pose, q: np.ndarray, t: np.ndarray) -> Pose:
    """Apply the rigid motion x -> q x + t to an object pose."""
    return Pose(quat_rotate(q, pose.position) + t, quat_mul(q, pose.orientation))
