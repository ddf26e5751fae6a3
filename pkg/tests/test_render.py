"""Point-cloud rendering: projection, occlusion, determinism, rigid motion."""

import numpy as np
import pytest

from conceptlab.concepts import ConceptId
from conceptlab.errors import OcclusionRejectError
from conceptlab.geometry import IDENTITY_QUAT, Pose, quat_conjugate, quat_from_axis_angle
from conceptlab.render import (
    RenderConfig,
    apply_world_motion,
    camera_to_world,
    delta_to_world_motion,
    project_pixels,
    render_segmented_cloud,
    sample_visible_scene,
    transform_moving_cloud,
    world_to_camera,
    zbuffer_survivors,
)
from conceptlab.scene import PlacedObject, SceneState, look_at_pose, sample_scene
from conceptlab.shapes import DEFAULT_CATALOG

CFG = RenderConfig(points_per_object=64, candidate_points=2048)
RNG = np.random.default_rng(11)


def _spec(shape_id):
    return next(s for s in DEFAULT_CATALOG if s.shape_id == shape_id)


def _frontal_scene(moving_behind: float) -> SceneState:
    """Camera on +x axis looking at the origin; boxes stacked along the ray."""
    camera = look_at_pose(np.array([1.2, 0.0, 0.3]), np.array([0.0, 0.0, 0.1]))
    anchor = PlacedObject(_spec("box"), Pose(np.array([0.0, 0.0, 0.1]), IDENTITY_QUAT))
    moving = PlacedObject(
        _spec("carton"), Pose(np.array([-moving_behind, 0.0, 0.1]), IDENTITY_QUAT)
    )
    return SceneState(anchor=anchor, moving=moving, camera=camera)


class TestRender:
    def test_shapes_and_segments(self):
        scene, cloud = sample_visible_scene(DEFAULT_CATALOG, ConceptId.NEAR, RNG, CFG)
        assert cloud.anchor_points.shape == (64, 3)
        assert cloud.moving_points.shape == (64, 3)
        combined = cloud.combined()
        assert combined.shape == (128, 4)
        assert np.all(combined[:64, 3] == 0) and np.all(combined[64:, 3] == 1)

    def test_deterministic_given_seed(self):
        scene = sample_scene(DEFAULT_CATALOG, ConceptId.NEAR, np.random.default_rng(3))
        a = render_segmented_cloud(scene, CFG, np.random.default_rng(9))
        b = render_segmented_cloud(scene, CFG, np.random.default_rng(9))
        np.testing.assert_array_equal(a.anchor_points, b.anchor_points)
        np.testing.assert_array_equal(a.moving_points, b.moving_points)

    def test_points_come_from_candidate_set(self):
        scene = sample_scene(DEFAULT_CATALOG, ConceptId.NEAR, np.random.default_rng(4))
        seed_rng = np.random.default_rng(5)
        cloud = render_segmented_cloud(scene, CFG, seed_rng)
        # regenerate the same candidate set and check membership in world frame
        regen = np.random.default_rng(5)
        candidates = []
        for placed in (scene.anchor, scene.moving):
            local = placed.spec.sample_surface(CFG.candidate_points, regen)
            candidates.append(placed.pose.transform_points(local))
        world = np.concatenate(candidates)
        returned = camera_to_world(
            np.concatenate([cloud.anchor_points, cloud.moving_points]), scene.camera
        )
        d = np.linalg.norm(returned[:, None, :] - world[None, :, :], axis=2).min(axis=1)
        assert d.max() < 1e-9

    def test_full_occlusion_rejects(self):
        scene = _frontal_scene(moving_behind=0.25)
        with pytest.raises(OcclusionRejectError):
            render_segmented_cloud(scene, CFG, np.random.default_rng(0))

    def test_no_moving_point_survives_in_anchor_pixels(self):
        # moving object partially hidden: half a workspace to the side
        scene = _frontal_scene(moving_behind=0.25)
        scene = scene.with_moving_pose(
            Pose(np.array([-0.25, 0.06, 0.1]), IDENTITY_QUAT)
        )
        pts_a, pix_a, pts_m, pix_m = zbuffer_survivors(scene, CFG, np.random.default_rng(1))
        assert len(pts_m) > 0
        assert not set(pix_m.tolist()) & set(pix_a.tolist())

    def test_project_pixels_culls_behind_camera(self):
        pts = np.array([[0.0, 0.0, -1.0], [0.0, 0.0, 1.0]])
        _, _, valid = project_pixels(pts, CFG)
        assert not valid[0] and valid[1]

    def test_world_camera_round_trip(self):
        scene = sample_scene(DEFAULT_CATALOG, ConceptId.NEAR, np.random.default_rng(8))
        pts = RNG.normal(size=(50, 3))
        back = camera_to_world(world_to_camera(pts, scene.camera), scene.camera)
        np.testing.assert_allclose(back, pts, atol=1e-12)


class TestTransformMovingCloud:
    def _cloud(self):
        _, cloud = sample_visible_scene(
            DEFAULT_CATALOG, ConceptId.NEAR, np.random.default_rng(21), CFG
        )
        return cloud

    def test_identity_delta(self):
        cloud = self._cloud()
        out = transform_moving_cloud(cloud, Pose.identity())
        np.testing.assert_allclose(out.moving_points, cloud.moving_points, atol=1e-12)
        np.testing.assert_array_equal(out.anchor_points, cloud.anchor_points)

    def test_pure_translation_shifts_centroid(self):
        cloud = self._cloud()
        t = np.array([0.05, -0.02, 0.03])
        out = transform_moving_cloud(cloud, Pose(t, IDENTITY_QUAT))
        np.testing.assert_allclose(
            out.moving_points.mean(0), cloud.moving_points.mean(0) + t, atol=1e-12
        )

    def test_pure_rotation_fixes_centroid(self):
        cloud = self._cloud()
        q = quat_from_axis_angle(np.array([0.3, -0.2, 0.9]))
        out = transform_moving_cloud(cloud, Pose(np.zeros(3), q))
        np.testing.assert_allclose(
            out.moving_points.mean(0), cloud.moving_points.mean(0), atol=1e-9
        )

    def test_inverse_round_trip(self):
        cloud = self._cloud()
        delta = Pose(np.array([0.1, 0.05, -0.07]), quat_from_axis_angle(np.array([0.4, 0.1, -0.3])))
        inverse = Pose(-delta.position, quat_conjugate(delta.orientation))
        back = transform_moving_cloud(transform_moving_cloud(cloud, delta), inverse)
        np.testing.assert_allclose(back.moving_points, cloud.moving_points, atol=1e-9)

    def test_world_motion_consistency(self):
        """The conjugated world motion moves world points exactly like the
        camera-frame delta moves camera points."""
        scene, cloud = sample_visible_scene(
            DEFAULT_CATALOG, ConceptId.NEAR, np.random.default_rng(22), CFG
        )
        delta = Pose(np.array([0.08, -0.03, 0.05]), quat_from_axis_angle(np.array([0.2, 0.5, -0.1])))
        moved = transform_moving_cloud(cloud, delta)
        q_w, t_w = delta_to_world_motion(cloud, scene.camera, delta)
        expected_world = camera_to_world(moved.moving_points, scene.camera)
        original_world = camera_to_world(cloud.moving_points, scene.camera)
        from conceptlab.geometry import quat_rotate

        via_motion = quat_rotate(q_w, original_world) + t_w
        np.testing.assert_allclose(via_motion, expected_world, atol=1e-9)

    def test_apply_world_motion_to_pose(self):
        pose = Pose(np.array([0.1, 0.2, 0.05]), quat_from_axis_angle(np.array([0.1, 0.0, 0.7])))
        q = quat_from_axis_angle(np.array([0.0, 0.3, 0.0]))
        t = np.array([0.02, 0.0, -0.01])
        moved = apply_world_motion(pose, q, t)
        from conceptlab.geometry import quat_rotate

        probe = np.array([0.01, -0.02, 0.03])
        direct = quat_rotate(q, pose.transform_points(probe)) + t
        np.testing.assert_allclose(moved.transform_points(probe), direct, atol=1e-12)
