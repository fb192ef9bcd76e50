"""Exception types shared across the package."""


class DefeatureError(Exception):
    """Base class for all package errors."""


class InvalidGeometryError(DefeatureError):
    """Geometry family parameters violate a domain invariant."""


class MeshResolutionError(DefeatureError):
    """Requested resolution cannot satisfy the feature-adjacent size bound."""

    def __init__(self, message, required_resolution=None):
        super().__init__(message)
        self.required_resolution = required_resolution


class MeshIncompatibilityError(DefeatureError):
    """Fields live on meshes without the required element correspondence."""


class UnknownTagError(KeyError, DefeatureError):
    """Boundary tag not present on the mesh."""


class GaugeRequiredError(DefeatureError):
    """Pure-Neumann system assembled without the mean-zero gauge flag."""


class SolverFailure(DefeatureError):
    """Iterative solver stopped before reaching the requested tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ConfigurationError(DefeatureError):
    """Experiment configuration is inconsistent or incomplete."""


class StageError(DefeatureError):
    """Wraps a failure inside a pipeline stage with the stage label."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
