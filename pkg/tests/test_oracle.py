"""Ground-truth concept values, binarization, and the simulated human."""

import numpy as np
import pytest

from conceptlab.concepts import ALL_CONCEPTS, ConceptId
from conceptlab.errors import ApplicabilityError
from conceptlab.geometry import Pose, quat_from_axis_angle, quat_mul, yaw_quat
from conceptlab.oracle import (
    SimulatedHuman,
    answer_feature_queries,
    binarize,
    concept_value,
    demo_scene,
    scene_label,
)
from conceptlab.scene import PlacedObject, sample_scene
from conceptlab.shapes import DEFAULT_CATALOG

from oracle_reference import reference_concept_value

RNG = np.random.default_rng(0)


def _scene(concept, rng=None):
    return sample_scene(DEFAULT_CATALOG, concept, rng or RNG)


def _with_moving_at(scene, offset, orientation=None):
    pose = Pose(
        scene.anchor.pose.position + np.asarray(offset),
        scene.moving.pose.orientation if orientation is None else orientation,
    )
    return scene.with_moving_pose(pose)


class TestConceptValues:
    def test_near_outside_cutoff(self):
        s = _with_moving_at(_scene(ConceptId.NEAR), [0.4, 0.0, 0.0])
        assert concept_value(ConceptId.NEAR, s) == 0.0

    def test_near_midpoint(self):
        s = _with_moving_at(_scene(ConceptId.NEAR), [0.15, 0.0, 0.0])
        assert concept_value(ConceptId.NEAR, s) == pytest.approx(0.5)

    def test_above_straight_up(self):
        s = _with_moving_at(_scene(ConceptId.ABOVE), [0.0, 0.0, 0.2])
        assert concept_value(ConceptId.ABOVE, s) == pytest.approx(1.0)

    def test_above_bb_gated_on_vertical_order(self):
        s = _scene(ConceptId.ABOVE_BB)
        below = _with_moving_at(s, [0.0, 0.0, -0.01])
        assert concept_value(ConceptId.ABOVE_BB, below) == 0.0
        above = _with_moving_at(s, [0.0, 0.0, 0.05])
        assert concept_value(ConceptId.ABOVE_BB, above) > 0.0

    def test_values_in_unit_interval(self):
        rng = np.random.default_rng(1)
        for concept in ALL_CONCEPTS:
            for _ in range(500):
                v = concept_value(concept, _scene(concept, rng))
                assert 0.0 <= v <= 1.0

    def test_applicability_enforced(self):
        s = _scene(ConceptId.UPRIGHT)
        box = next(spec for spec in DEFAULT_CATALOG if spec.shape_id == "box")
        from dataclasses import replace

        bad = replace(s, moving=PlacedObject(box, s.moving.pose))
        with pytest.raises(ApplicabilityError):
            concept_value(ConceptId.UPRIGHT, bad)

    def test_monotone_in_distance(self):
        s = _scene(ConceptId.NEAR)
        values = [
            concept_value(ConceptId.NEAR, _with_moving_at(s, [d, 0, 0]))
            for d in np.linspace(0.01, 0.29, 20)
        ]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_monotone_in_angle(self):
        s = _scene(ConceptId.UPRIGHT)
        values = []
        for tilt in np.linspace(0.0, 44.0, 15):
            q = quat_from_axis_angle(np.radians(tilt) * np.array([1.0, 0.0, 0.0]))
            values.append(
                concept_value(ConceptId.UPRIGHT, s.with_moving_pose(Pose(s.moving.pose.position, q)))
            )
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_yaw_invariance_of_relative_concepts(self):
        """A common yaw applied to both objects preserves relative concepts
        but not the world-frame ones."""
        rng = np.random.default_rng(2)
        for concept in (
            ConceptId.NEAR,
            ConceptId.ALIGNED_HORIZ,
            ConceptId.ALIGNED_VERT,
            ConceptId.FORWARD,
            ConceptId.FRONT,
            ConceptId.TOP,
        ):
            for _ in range(50):
                s = _scene(concept, rng)
                v0 = concept_value(concept, s)
                yaw = yaw_quat(rng.uniform(0, 2 * np.pi))
                from dataclasses import replace
                from conceptlab.geometry import quat_rotate

                def spun(placed):
                    return PlacedObject(
                        placed.spec,
                        Pose(quat_rotate(yaw, placed.pose.position), quat_mul(yaw, placed.pose.orientation)),
                    )

                spun_scene = replace(s, anchor=spun(s.anchor), moving=spun(s.moving))
                assert concept_value(concept, spun_scene) == pytest.approx(v0, abs=1e-9)

    def test_world_tilt_changes_world_concepts(self):
        rng = np.random.default_rng(3)
        tilt = quat_from_axis_angle(np.radians(30) * np.array([1.0, 0.0, 0.0]))
        changed = {ConceptId.ABOVE: 0, ConceptId.UPRIGHT: 0}
        for concept in changed:
            for _ in range(50):
                s = _scene(concept, rng)
                v0 = concept_value(concept, s)
                from dataclasses import replace
                from conceptlab.geometry import quat_rotate

                def tilted(placed):
                    return PlacedObject(
                        placed.spec,
                        Pose(quat_rotate(tilt, placed.pose.position), quat_mul(tilt, placed.pose.orientation)),
                    )

                s2 = replace(s, anchor=tilted(s.anchor), moving=tilted(s.moving))
                if abs(concept_value(concept, s2) - v0) > 1e-6:
                    changed[concept] += 1
        assert all(count > 10 for count in changed.values()), changed

    def test_matches_reference_oracle(self):
        rng = np.random.default_rng(4)
        for concept in ALL_CONCEPTS:
            for _ in range(200):
                s = _scene(concept, rng)
                ours = concept_value(concept, s)
                theirs = reference_concept_value(concept.value, s)
                assert ours == pytest.approx(theirs, abs=1e-9), concept


class TestBinarize:
    def test_simple(self):
        assert binarize(0.7) == 1
        assert binarize(0.0) == 0

    def test_above_angle_boundary(self):
        s = _scene(ConceptId.ABOVE)
        for angle, expected in ((44.9, 1), (45.1, 0)):
            rad = np.radians(angle)
            offset = 0.2 * np.array([np.sin(rad), 0.0, np.cos(rad)])
            assert scene_label(ConceptId.ABOVE, _with_moving_at(s, offset)) == expected


class TestSimulatedHuman:
    def test_noiseless_labels_match_oracle(self):
        human = SimulatedHuman(ConceptId.NEAR, 0.0, np.random.default_rng(0))
        rng = np.random.default_rng(1)
        for _ in range(100):
            s = _scene(ConceptId.NEAR, rng)
            assert human.answer_label_query(s) == scene_label(ConceptId.NEAR, s)

    def test_noise_rate(self):
        rng = np.random.default_rng(2)
        scenes = [_scene(ConceptId.NEAR, rng) for _ in range(2000)]
        truth = np.array([scene_label(ConceptId.NEAR, s) for s in scenes])
        human = SimulatedHuman(ConceptId.NEAR, 0.1, np.random.default_rng(3))
        answers = np.array([human.answer_label_query(s) for s in scenes])
        agreement = (answers == truth).mean()
        assert 0.87 <= agreement <= 0.93

    def test_one_rng_draw_per_call(self):
        h1 = SimulatedHuman(ConceptId.NEAR, 0.0, np.random.default_rng(5))
        h2 = SimulatedHuman(ConceptId.NEAR, 0.0, np.random.default_rng(5))
        s = _scene(ConceptId.NEAR, np.random.default_rng(6))
        h1.answer_label_query(s)
        h2.rng.random()
        assert h1.rng.random() == h2.rng.random()


class TestDemoQueries:
    def test_constructive_labels(self):
        rng = np.random.default_rng(7)
        for concept in ALL_CONCEPTS:
            for want in (1, 0):
                s = demo_scene(concept, want, rng)
                assert scene_label(concept, s) == want

    def test_above_demo_inside_cone(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            s = demo_scene(ConceptId.ABOVE, 1, rng)
            from conceptlab.geometry import angle_between

            d = s.moving.pose.position - s.anchor.pose.position
            assert angle_between(d, [0, 0, 1]) < 45.0

    def test_near_demo_negative_distance(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            s = demo_scene(ConceptId.NEAR, 0, rng)
            assert np.linalg.norm(s.moving.pose.position - s.anchor.pose.position) > 0.3

    def test_alternating_ratio_exactly_one(self):
        human = SimulatedHuman(ConceptId.ABOVE, 0.0, np.random.default_rng(10))
        rng = np.random.default_rng(11)
        desired = [1 if i % 2 == 0 else 0 for i in range(200)]
        labels = [human.answer_demo_query(d, rng)[1] for d in desired]
        assert sum(labels) * 2 == len(labels)

    def test_demo_query_returns_noisy_label(self):
        human = SimulatedHuman(ConceptId.ABOVE, 1.0, np.random.default_rng(12))
        _, label = human.answer_demo_query(1, np.random.default_rng(13))
        assert label == 0  # noise level 1 always flips


class TestFeatureAnswers:
    def test_upright_single_object(self):
        assert answer_feature_queries(ConceptId.UPRIGHT).f1_single_object

    def test_above_bb_sizes_matter(self):
        assert answer_feature_queries(ConceptId.ABOVE_BB).f3_sizes_matter

    def test_near_relative_no_sizes(self):
        a = answer_feature_queries(ConceptId.NEAR)
        assert a.f2_frame == "relative" and not a.f3_sizes_matter

    def test_only_upright_is_single_object(self):
        singles = [c for c in ALL_CONCEPTS if answer_feature_queries(c).f1_single_object]
        assert singles == [ConceptId.UPRIGHT]

    def test_only_above_bb_needs_sizes(self):
        sized = [c for c in ALL_CONCEPTS if answer_feature_queries(c).f3_sizes_matter]
        assert sized == [ConceptId.ABOVE_BB]
