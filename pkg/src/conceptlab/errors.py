"""Exception types shared across the package."""


class ConceptLabError(Exception):
    """Base class for all package errors."""


class InvalidQuaternionError(ConceptLabError):
    """Quaternion norm is too far from 1 to be treated as a rotation."""


class DegenerateInputError(ConceptLabError):
    """Geometric input (e.g. a near-zero vector) has no defined answer."""


class ConfigurationError(ConceptLabError):
    """A config asks for something the catalog or parameters cannot provide."""


class ApplicabilityError(ConceptLabError):
    """Scene objects do not satisfy a concept's affordance requirements."""


class OcclusionRejectError(ConceptLabError):
    """Too few visible points for an object; caller should resample the scene."""


class SamplerError(ConceptLabError):
    """Constructive or rejection sampling failed to produce a valid state."""


class ShapeError(ConceptLabError):
    """Array shape does not match what a model expects."""


class DivergenceError(ConceptLabError):
    """An iterative optimization produced non-finite values."""
