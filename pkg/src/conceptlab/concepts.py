"""Concept identifiers, cutoffs, affordance requirements, and feature answers."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class ConceptId(str, Enum):
    ABOVE = "above"
    ABOVE_BB = "above_bb"
    NEAR = "near"
    UPRIGHT = "upright"
    ALIGNED_HORIZ = "aligned_horiz"
    ALIGNED_VERT = "aligned_vert"
    FORWARD = "forward"
    FRONT = "front"
    TOP = "top"


@dataclass(frozen=True)
class ConceptSpec:
    """Cutoff and affordance requirements for one spatial relation.

    `cutoff` is degrees for angular relations and meters for `near`;
    `above_bb` is area-based and carries no cutoff. The flag names refer to
    ObjectSpec attributes the anchor / moving object must have for the
    relation to apply.
    """

    cutoff: float | None
    anchor_flag: str | None = None
    moving_flag: str | None = None


CONCEPT_SPECS: dict[ConceptId, ConceptSpec] = {
    ConceptId.ABOVE: ConceptSpec(cutoff=45.0),
    ConceptId.ABOVE_BB: ConceptSpec(cutoff=None),
    ConceptId.NEAR: ConceptSpec(cutoff=0.3),
    ConceptId.UPRIGHT: ConceptSpec(cutoff=45.0, moving_flag="has_up"),
    ConceptId.ALIGNED_HORIZ: ConceptSpec(
        cutoff=45.0,
        anchor_flag="horizontally_alignable",
        moving_flag="horizontally_alignable",
    ),
    ConceptId.ALIGNED_VERT: ConceptSpec(
        cutoff=45.0,
        anchor_flag="vertically_alignable",
        moving_flag="vertically_alignable",
    ),
    # The anchor's x axis defines the direction; only it needs a clear front.
    ConceptId.FORWARD: ConceptSpec(cutoff=90.0, anchor_flag="has_front"),
    ConceptId.FRONT: ConceptSpec(cutoff=45.0, anchor_flag="has_front"),
    ConceptId.TOP: ConceptSpec(cutoff=45.0, anchor_flag="has_up"),
}

ALL_CONCEPTS = tuple(ConceptId)


@dataclass(frozen=True)
class FeatureAnswers:
    """Answers to the three feature questions that prune the privileged space.

    f1_single_object: does the relation concern only the moving object?
    f2_frame: do absolute poses matter, or only the relative one?
    f3_sizes_matter: do bounding-box sizes matter?
    """

    f1_single_object: bool
    f2_frame: str  # "absolute" or "relative"
    f3_sizes_matter: bool

    def __post_init__(self):
        if self.f2_frame not in ("absolute", "relative"):
            raise ValueError(f"f2_frame must be absolute|relative, got {self.f2_frame}")


FEATURE_ANSWER_TABLE: dict[ConceptId, FeatureAnswers] = {
    # `above` only needs where the moving object sits relative to the anchor
    # (the positional difference is kept by the "relative" answer).
    ConceptId.ABOVE: FeatureAnswers(False, "relative", False),
    ConceptId.ABOVE_BB: FeatureAnswers(False, "relative", True),
    ConceptId.NEAR: FeatureAnswers(False, "relative", False),
    ConceptId.UPRIGHT: FeatureAnswers(True, "absolute", False),
    ConceptId.ALIGNED_HORIZ: FeatureAnswers(False, "relative", False),
    ConceptId.ALIGNED_VERT: FeatureAnswers(False, "relative", False),
    ConceptId.FORWARD: FeatureAnswers(False, "relative", False),
    ConceptId.FRONT: FeatureAnswers(False, "relative", False),
    ConceptId.TOP: FeatureAnswers(False, "relative", False),
}
