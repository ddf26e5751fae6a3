"""Scene sampling, the privileged observation, and feature masking."""

import numpy as np
import pytest

from conceptlab.concepts import ALL_CONCEPTS, ConceptId, FeatureAnswers
from conceptlab.errors import ConfigurationError
from conceptlab.geometry import Pose, quat_rotate
from conceptlab.oracle import answer_feature_queries
from conceptlab.scene import (
    FEATURE_DIM,
    MOVING_Z_MAX,
    WORKSPACE_HALF_XY,
    apply_feature_mask,
    applicable_specs,
    batch_privileged_features,
    feature_mask_from_answers,
    privileged_features,
    sample_scene,
)
from conceptlab.shapes import DEFAULT_CATALOG

RNG = np.random.default_rng(7)


class TestCatalog:
    def test_eight_shapes(self):
        assert len(DEFAULT_CATALOG) == 8
        assert len({s.shape_id for s in DEFAULT_CATALOG}) == 8

    def test_affordance_subsets_nonempty(self):
        for concept in ALL_CONCEPTS:
            anchors, movings = applicable_specs(DEFAULT_CATALOG, concept)
            assert anchors and movings

    def test_front_implies_x_asymmetry(self):
        # the +x half must carry more surface than the -x half
        for spec in DEFAULT_CATALOG:
            if not spec.has_front:
                continue
            pts = spec.sample_surface(4000, np.random.default_rng(0))
            assert abs(pts[:, 0].mean()) > 1e-3, spec.shape_id

    def test_surface_points_inside_bbox(self):
        for spec in DEFAULT_CATALOG:
            pts = spec.sample_surface(2000, np.random.default_rng(1))
            half = spec.half_extents.half_extents
            assert np.all(np.abs(pts) <= half + 1e-9), spec.shape_id

    def test_resting_face_reaches_bbox_bottom(self):
        for spec in DEFAULT_CATALOG:
            pts = spec.sample_surface(4000, np.random.default_rng(2))
            assert pts[:, 2].min() <= -spec.half_extents.half_extents[2] + 0.01, spec.shape_id


class TestSampleScene:
    def test_positions_within_workspace(self):
        rng = np.random.default_rng(3)
        for _ in range(1000):
            s = sample_scene(DEFAULT_CATALOG, ConceptId.NEAR, rng)
            for placed in (s.anchor, s.moving):
                assert abs(placed.pose.position[0]) <= WORKSPACE_HALF_XY
                assert abs(placed.pose.position[1]) <= WORKSPACE_HALF_XY
            assert s.moving.pose.position[2] <= MOVING_Z_MAX + 1e-12
            assert s.moving.pose.position[2] >= s.moving.spec.resting_height - 1e-12

    def test_anchor_rests_upright_on_table(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            s = sample_scene(DEFAULT_CATALOG, ConceptId.NEAR, rng)
            assert s.anchor.pose.position[2] == pytest.approx(s.anchor.spec.resting_height)
            up = quat_rotate(s.anchor.pose.orientation, [0, 0, 1])
            np.testing.assert_allclose(up, [0, 0, 1], atol=1e-9)

    def test_affordance_subsets_respected(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            s = sample_scene(DEFAULT_CATALOG, ConceptId.UPRIGHT, rng)
            assert s.moving.spec.has_up
        for _ in range(200):
            s = sample_scene(DEFAULT_CATALOG, ConceptId.FRONT, rng)
            assert s.anchor.spec.has_front

    def test_near_uses_full_catalog(self):
        anchors, movings = applicable_specs(DEFAULT_CATALOG, ConceptId.NEAR)
        assert len(anchors) == len(DEFAULT_CATALOG)
        assert len(movings) == len(DEFAULT_CATALOG)

    def test_camera_looks_at_workspace(self):
        rng = np.random.default_rng(6)
        s = sample_scene(DEFAULT_CATALOG, ConceptId.NEAR, rng)
        forward = quat_rotate(s.camera.orientation, [0, 0, 1])
        to_center = np.array([0, 0, MOVING_Z_MAX / 2]) - s.camera.position
        cos = forward @ to_center / np.linalg.norm(to_center)
        assert cos > 0.999

    def test_empty_subset_raises(self):
        boxes_only = [s for s in DEFAULT_CATALOG if s.shape_id == "box"]
        with pytest.raises(ConfigurationError):
            sample_scene(boxes_only, ConceptId.FRONT, np.random.default_rng(0))


class TestPrivilegedFeatures:
    def test_length_and_mask(self):
        s = sample_scene(DEFAULT_CATALOG, ConceptId.NEAR, RNG)
        obs = privileged_features(s)
        assert obs.features.shape == (FEATURE_DIM,)
        assert obs.mask.all()

    def test_coincident_poses(self):
        s = sample_scene(DEFAULT_CATALOG, ConceptId.NEAR, np.random.default_rng(1))
        pose = Pose(np.array([0.1, 0.2, 0.1]), np.array([0, 0, 0, 1.0]))
        s = s.with_moving_pose(pose)
        from dataclasses import replace
        from conceptlab.scene import PlacedObject

        s = replace(s, anchor=PlacedObject(s.anchor.spec, pose))
        obs = privileged_features(s)
        np.testing.assert_allclose(obs.features[14:17], 0, atol=1e-12)  # relative position
        np.testing.assert_allclose(obs.features[17:21], [0, 0, 0, 1], atol=1e-12)
        np.testing.assert_allclose(obs.features[21:24], 0, atol=1e-12)  # position diff

    def test_position_difference_block(self):
        s = sample_scene(DEFAULT_CATALOG, ConceptId.NEAR, np.random.default_rng(2))
        diff = s.moving.pose.position - s.anchor.pose.position
        np.testing.assert_allclose(privileged_features(s).features[21:24], diff, atol=1e-12)

    def test_batch_matches_single(self):
        s = sample_scene(DEFAULT_CATALOG, ConceptId.NEAR, np.random.default_rng(3))
        positions = RNG.normal(size=(5, 3))
        quats = np.array([privileged_features(s).features[10:14]] * 5)
        batch = batch_privileged_features(
            s.anchor.pose,
            s.anchor.spec.half_extents.half_extents,
            positions,
            quats,
            s.moving.spec.half_extents.half_extents,
        )
        assert batch.shape == (5, FEATURE_DIM)
        for i in range(5):
            single = privileged_features(s.with_moving_pose(Pose(positions[i], quats[i])))
            np.testing.assert_allclose(batch[i], single.features, atol=1e-12)


class TestFeatureMask:
    def test_upright_keeps_only_moving_pose(self):
        obs = privileged_features(sample_scene(DEFAULT_CATALOG, ConceptId.UPRIGHT, RNG))
        masked = apply_feature_mask(obs, answer_feature_queries(ConceptId.UPRIGHT))
        active = np.flatnonzero(masked.mask)
        assert list(active) == list(range(7, 14))
        assert np.all(masked.features[~masked.mask] == 0.0)

    def test_near_drops_extents(self):
        obs = privileged_features(sample_scene(DEFAULT_CATALOG, ConceptId.NEAR, RNG))
        masked = apply_feature_mask(obs, answer_feature_queries(ConceptId.NEAR))
        assert not masked.mask[24:30].any()
        assert masked.mask[14:24].all()  # relative pose + position difference survive

    def test_permissive_answers_change_nothing(self):
        obs = privileged_features(sample_scene(DEFAULT_CATALOG, ConceptId.NEAR, RNG))
        masked = apply_feature_mask(obs, FeatureAnswers(False, "absolute", True))
        # absolute frame keeps both object poses and both extents
        assert masked.mask[0:14].all() and masked.mask[24:30].all()
        np.testing.assert_array_equal(masked.features[0:14], obs.features[0:14])

    def test_masked_features_zeroed(self):
        obs = privileged_features(sample_scene(DEFAULT_CATALOG, ConceptId.ABOVE_BB, RNG))
        masked = apply_feature_mask(obs, answer_feature_queries(ConceptId.ABOVE_BB))
        assert masked.mask[24:30].all()  # sizes matter for the box-projection relation
        assert not masked.mask[0:14].any()
        assert np.all(masked.features[~masked.mask] == 0.0)

    def test_mask_table_consistency(self):
        for concept in ALL_CONCEPTS:
            mask = feature_mask_from_answers(answer_feature_queries(concept))
            assert mask.any(), concept
