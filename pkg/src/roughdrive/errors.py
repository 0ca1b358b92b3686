"""Exception types raised across the package."""


class RoughDriveError(Exception):
    """Base class for all library errors."""


class GridError(RoughDriveError, ValueError):
    """Invalid grid construction or a time that is not a grid node."""


class EstimationError(RoughDriveError):
    """Too few usable scales to fit a Hölder exponent."""


class SewingDivergence(RoughDriveError):
    """Dyadic Riemann sums failed to settle."""


class BoundViolation(RoughDriveError):
    """No λ in the scanned range satisfied the growth bound."""

    def __init__(self, message, min_ratio):
        super().__init__(message)
        self.min_ratio = min_ratio


class StepSizeError(RoughDriveError):
    """A characteristic step moved a point by more than half the domain."""


class ConfigError(RoughDriveError, ValueError):
    """Experiment configuration failed validation."""


class PreconditionError(RoughDriveError, ValueError):
    """An operation's stated precondition does not hold, so no result is claimed."""
