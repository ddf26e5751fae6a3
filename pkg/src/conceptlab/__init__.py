"""conceptlab: spatial-concept learning from few queries via privileged
low-dimensional observations, with bootstrapped point-cloud classifiers."""

from .concepts import ALL_CONCEPTS, ConceptId, FeatureAnswers
from .geometry import ObbExtents, Pose
from .oracle import SimulatedHuman, binarize, concept_value
from .render import PointCloudObservation, RenderConfig, render_segmented_cloud
from .scene import PrivilegedObservation, SceneState, privileged_features, sample_scene
from .shapes import DEFAULT_CATALOG, ObjectSpec

__all__ = [
    "ALL_CONCEPTS",
    "ConceptId",
    "FeatureAnswers",
    "ObbExtents",
    "Pose",
    "SimulatedHuman",
    "binarize",
    "concept_value",
    "PointCloudObservation",
    "RenderConfig",
    "render_segmented_cloud",
    "PrivilegedObservation",
    "SceneState",
    "privileged_features",
    "sample_scene",
    "ObjectSpec",
    "DEFAULT_CATALOG",
]
