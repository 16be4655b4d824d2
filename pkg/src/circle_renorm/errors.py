"""Exception hierarchy shared by the package."""


class CircleRenormError(Exception):
    """Base class for all package errors."""


class ConfigError(CircleRenormError, ValueError):
    """Malformed input, map specification or run configuration."""


class PrecisionError(CircleRenormError):
    """Working precision too low, or a value fell below the precision floor."""


class BudgetExceededError(CircleRenormError):
    """An iteration or evaluation budget ran out before the task finished."""


class RationalRotationError(CircleRenormError):
    """The rotation number looks rational (periodic orbit or stalled return)."""


class TuningError(CircleRenormError):
    """Parameter bisection could not bracket or confirm the target."""


class NotADiffeomorphismError(CircleRenormError):
    """A map or iterate expected to be a local diffeomorphism has a critical point."""


class CombinatoricsMismatchError(CircleRenormError):
    """Two maps (or two partitions) disagree combinatorially.

    ``diff`` optionally carries a structured description of the first
    disagreement.
    """

    def __init__(self, message, diff=None):
        super().__init__(message)
        self.diff = diff


class PairError(CircleRenormError):
    """A commuting pair violates a structural precondition."""


class ChiCapError(PairError):
    """The return count of a pair exceeds the configured cap."""
