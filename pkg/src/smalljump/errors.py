"""Exception types shared across the package."""


class RegimeError(ValueError):
    """Input lies outside the regime an operation is defined for."""


class CoveringError(ValueError):
    """The dyadic covering cannot be built on the given grid."""


class FitError(ValueError):
    """A rigid-motion fit is impossible (degenerate data)."""


class SolverError(RuntimeError):
    """The elastic solve failed or the system is singular."""
