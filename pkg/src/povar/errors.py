"""Exception types raised across the package."""


class PovarError(Exception):
    """Base class for all package errors."""


class DomainError(PovarError, ValueError):
    """An input lies outside the domain of the operation."""


class InstabilityError(DomainError):
    """The transition matrix does not satisfy ``||theta||_2 < 1``."""


class ConvergenceError(PovarError, RuntimeError):
    """An iterative routine hit its iteration cap.

    The last iterate is kept on ``last`` for diagnostics.
    """

    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last


class DegenerateSamplingError(DomainError):
    """The scaling matrix has a non-positive entry (no co-observations)."""


class LPSolverError(PovarError, RuntimeError):
    """The simplex solver exceeded its pivot budget."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ScaleError(DomainError):
    """A verification-scale routine was asked for a problem that is too large."""


class EmptyProjectionError(DomainError):
    """The sampling mask selects no entry at all."""
