"""Pose, quaternion, and box-projection primitives."""

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from conceptlab.errors import DegenerateInputError, InvalidQuaternionError
from conceptlab.geometry import (
    IDENTITY_QUAT,
    ObbExtents,
    Pose,
    angle_between,
    projected_aabb_intersection,
    projected_rect,
    quat_cost,
    quat_from_axis_angle,
    quat_mul,
    quat_rotate,
    random_quat,
    rect_area,
    relative_pose,
    yaw_quat,
)

RNG = np.random.default_rng(42)


class TestQuatRotate:
    def test_identity(self):
        v = np.array([1.0, 2.0, 3.0])
        np.testing.assert_allclose(quat_rotate(IDENTITY_QUAT, v), v, atol=1e-12)

    def test_quarter_turn_about_z(self):
        q = yaw_quat(np.pi / 2)
        np.testing.assert_allclose(quat_rotate(q, [1, 0, 0]), [0, 1, 0], atol=1e-12)

    def test_preserves_norm(self):
        for _ in range(200):
            q = random_quat(RNG)
            v = RNG.normal(size=3) * 10
            out = quat_rotate(q, v)
            assert abs(np.linalg.norm(out) - np.linalg.norm(v)) < 1e-9

    def test_matches_scipy(self):
        for _ in range(100):
            q = random_quat(RNG)
            v = RNG.normal(size=3)
            np.testing.assert_allclose(
                quat_rotate(q, v), Rotation.from_quat(q).apply(v), atol=1e-12
            )

    def test_rejects_non_unit(self):
        with pytest.raises(InvalidQuaternionError):
            quat_rotate(np.array([0.0, 0.0, 0.0, 1.1]), np.ones(3))

    def test_broadcasts(self):
        qs = random_quat(RNG, size=16)
        vs = RNG.normal(size=(16, 3))
        batched = quat_rotate(qs, vs)
        for i in range(16):
            np.testing.assert_allclose(batched[i], quat_rotate(qs[i], vs[i]), atol=1e-12)


class TestPose:
    def test_canonicalizes_sign(self):
        q = -np.array(IDENTITY_QUAT)
        pose = Pose(np.zeros(3), q)
        assert pose.orientation[3] > 0

    def test_rejects_bad_norm(self):
        with pytest.raises(InvalidQuaternionError):
            Pose(np.zeros(3), np.array([0.5, 0.5, 0.5, 0.6]))

    def test_relative_pose_of_self_is_identity(self):
        pose = Pose(RNG.normal(size=3), random_quat(RNG))
        rel = relative_pose(pose, pose)
        np.testing.assert_allclose(rel.position, 0, atol=1e-12)
        np.testing.assert_allclose(rel.orientation, IDENTITY_QUAT, atol=1e-12)

    def test_relative_pose_translation_only(self):
        anchor = Pose.identity()
        moving = Pose(np.array([1.0, 0.0, 0.0]), IDENTITY_QUAT)
        rel = relative_pose(anchor, moving)
        np.testing.assert_allclose(rel.position, [1, 0, 0], atol=1e-12)

    def test_compose_recovers_moving(self):
        for _ in range(1000):
            anchor = Pose(RNG.normal(size=3), random_quat(RNG))
            moving = Pose(RNG.normal(size=3), random_quat(RNG))
            rel = relative_pose(anchor, moving)
            recovered = anchor.compose(rel)
            np.testing.assert_allclose(recovered.position, moving.position, atol=1e-9)
            assert abs(abs(recovered.orientation @ moving.orientation) - 1) < 1e-9

    def test_inverse(self):
        pose = Pose(RNG.normal(size=3), random_quat(RNG))
        round_trip = pose.compose(pose.inverse())
        np.testing.assert_allclose(round_trip.position, 0, atol=1e-12)
        assert abs(round_trip.orientation[3]) > 1 - 1e-12


class TestAngleBetween:
    def test_examples(self):
        assert angle_between([0, 0, 1], [0, 0, 1]) == pytest.approx(0.0, abs=1e-12)
        assert angle_between([1, 0, 0], [0, 1, 0]) == pytest.approx(90.0, abs=1e-9)
        assert angle_between([0, 0, 1], [0, 1, 1]) == pytest.approx(45.0, abs=1e-9)

    def test_symmetric_and_scale_invariant(self):
        for _ in range(200):
            u = RNG.normal(size=3)
            v = RNG.normal(size=3)
            a = angle_between(u, v)
            assert a == pytest.approx(angle_between(v, u), abs=1e-9)
            assert a == pytest.approx(angle_between(3.7 * u, 0.2 * v), abs=1e-7)
            assert 0.0 <= a <= 180.0

    def test_degenerate(self):
        with pytest.raises(DegenerateInputError):
            angle_between([0, 0, 0], [1, 0, 0])


class TestProjectedIntersection:
    def test_coincident_unit_boxes(self):
        ext = ObbExtents(np.array([0.5, 0.5, 0.5]))
        pose = Pose.identity()
        assert projected_aabb_intersection(pose, ext, pose, ext) == pytest.approx(1.0)

    def test_half_offset(self):
        ext = ObbExtents(np.array([0.5, 0.5, 0.5]))
        a = Pose.identity()
        b = Pose(np.array([0.5, 0.0, 0.0]), IDENTITY_QUAT)
        assert projected_aabb_intersection(a, ext, b, ext) == pytest.approx(0.5)

    def test_disjoint(self):
        ext = ObbExtents(np.array([0.5, 0.5, 0.5]))
        a = Pose.identity()
        b = Pose(np.array([2.0, 0.0, 0.0]), IDENTITY_QUAT)
        assert projected_aabb_intersection(a, ext, b, ext) == 0.0

    def test_symmetric_and_bounded(self):
        for _ in range(300):
            pa = Pose(RNG.normal(size=3) * 0.3, random_quat(RNG))
            pb = Pose(RNG.normal(size=3) * 0.3, random_quat(RNG))
            ea = ObbExtents(RNG.uniform(0.02, 0.2, 3))
            eb = ObbExtents(RNG.uniform(0.02, 0.2, 3))
            ab = projected_aabb_intersection(pa, ea, pb, eb)
            ba = projected_aabb_intersection(pb, eb, pa, ea)
            assert ab == pytest.approx(ba, abs=1e-12)
            assert ab <= min(rect_area(*projected_rect(pa, ea)), rect_area(*projected_rect(pb, eb))) + 1e-12

    def test_positive_extents_required(self):
        with pytest.raises(DegenerateInputError):
            ObbExtents(np.array([0.1, 0.0, 0.1]))


class TestQuatCost:
    def test_same_rotation_zero(self):
        assert quat_cost(IDENTITY_QUAT, IDENTITY_QUAT, 0.001) == pytest.approx(0.0)

    def test_orthogonal_inner_product(self):
        q90 = np.array([0.0, 0.0, 1.0, 0.0])  # 180 deg about z: inner product 0
        assert quat_cost(q90, IDENTITY_QUAT, 0.001) == pytest.approx(0.001)

    def test_double_cover(self):
        for _ in range(100):
            q = random_quat(RNG)
            assert quat_cost(q, -q, 0.001) == pytest.approx(0.0, abs=1e-15)
            q2 = random_quat(RNG)
            assert quat_cost(q, q2, 0.5) == pytest.approx(quat_cost(-q, q2, 0.5), abs=1e-15)

    def test_nonnegative(self):
        for _ in range(100):
            assert quat_cost(random_quat(RNG), random_quat(RNG), 0.001) >= 0.0


class TestAxisAngle:
    def test_round_trip_against_scipy(self):
        for _ in range(200):
            rv = RNG.normal(size=3)
            q = quat_from_axis_angle(rv)
            expected = Rotation.from_rotvec(rv).as_quat()
            assert abs(abs(q @ expected) - 1.0) < 1e-12

    def test_zero_vector_is_identity(self):
        np.testing.assert_allclose(quat_from_axis_angle(np.zeros(3)), IDENTITY_QUAT, atol=1e-15)

    def test_mul_matches_scipy(self):
        for _ in range(100):
            q1, q2 = random_quat(RNG), random_quat(RNG)
            ours = quat_mul(q1, q2)
            theirs = (Rotation.from_quat(q1) * Rotation.from_quat(q2)).as_quat()
            assert abs(abs(ours @ theirs) - 1.0) < 1e-12
