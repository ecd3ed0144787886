"""Exception hierarchy shared across the simulator."""


class SimError(RuntimeError):
    """Base class for all simulator errors."""


class ParameterError(SimError, ValueError):
    """A physical or numerical parameter is outside its admissible domain."""


class InvertedElementError(SimError):
    """det(F) <= 0 was encountered where the caller asked for strictness.

    Carries the offending particle index when known (``particle`` attribute,
    ``None`` for standalone evaluations).
    """

    def __init__(self, message: str, particle: int | None = None):
        super().__init__(message)
        self.particle = particle


class StencilError(SimError):
    """A particle position leaves no room for its 3x3x3 grid stencil."""


class MeshError(SimError):
    """A triangle mesh is unusable (open, non-manifold, unreadable)."""


class SpawnError(SimError):
    """A particle spawn request violates the domain margin or is empty."""


class SceneError(SimError, ValueError):
    """A scenario description fails validation."""


class NumericalFailure(SimError):
    """The simulation produced NaN/inf state."""
