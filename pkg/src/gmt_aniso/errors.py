"""Exception types shared across the package."""


class GmtAnisoError(Exception):
    """Base class for all package errors."""


class InputError(GmtAnisoError, ValueError):
    """Malformed or out-of-contract input (bad radius, singular matrix, ...)."""


class DomainError(GmtAnisoError, ValueError):
    """Structurally valid input on which the operation is undefined
    (zero mass, empty intersection, degenerate configuration)."""


class ExtrapolationError(InputError):
    """Query outside the hull of a grid-sampled field."""


class SpdViolationError(GmtAnisoError):
    """A matrix that must be symmetric positive definite is not."""


class HypothesisError(DomainError):
    """The hypotheses of the quantitative statement being checked fail
    for the supplied configuration."""
