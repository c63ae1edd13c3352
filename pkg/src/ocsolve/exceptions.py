"""Exception types shared across the solver."""


class OcsolveError(Exception):
    """Base class for all solver errors."""


class NonFiniteState(OcsolveError):
    """An integration produced a non-finite stage or node value."""


class DimensionMismatch(OcsolveError):
    """Operands live on different grids or have inconsistent shapes."""


class IndefiniteR(OcsolveError):
    """A reweighted control cost R(t) failed its positive-definiteness check."""


class InfeasibleIterate(OcsolveError):
    """An iterate violates the linear dynamics beyond the allowed tolerance."""


class MissingStepCache(OcsolveError):
    """A residual evaluation received an incomplete step cache."""


class AreSolveFailed(OcsolveError):
    """The algebraic Riccati iteration for a terminal cost did not converge."""
