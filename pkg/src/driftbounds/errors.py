"""Exception hierarchy shared by all modules."""


class DriftBoundsError(Exception):
    """Base class for every error raised by this package."""


class DomainError(DriftBoundsError, ValueError):
    """An argument lies outside the domain a formula is defined on."""


class PreconditionError(DriftBoundsError, ValueError):
    """The hypotheses of a check are not met (e.g. chain not reversible)."""


class ReducibleChainError(DriftBoundsError, ValueError):
    """The chain is not irreducible, so its stationary law is not unique."""


class DegenerateMinorizationError(DriftBoundsError, ValueError):
    """No positive minorization mass exists for the requested small set."""


class NotReachedError(DriftBoundsError):
    """A bound curve does not drop below the target within the horizon."""


class HorizonTooSmallError(DriftBoundsError):
    """A truncated series leaves more residual mass than tolerated."""


class SmallSetError(DriftBoundsError):
    """The set {PV > lambda V} is not a bounded interval on the scan domain."""


class NumericalError(DriftBoundsError, ArithmeticError):
    """An internal numerical procedure failed (quadrature, singular solve)."""
