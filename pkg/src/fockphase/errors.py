"""Exception hierarchy shared across the package."""


class FockPhaseError(Exception):
    """Base class for all package errors."""


class InvalidSpecError(FockPhaseError, ValueError):
    """A condensate, event, or table violates its invariants."""


class QuadratureDegreeError(FockPhaseError, ValueError):
    """The phase grid is too coarse to integrate the record exactly."""


class ZeroProbabilityRecordError(FockPhaseError):
    """The record has vanishing probability under the current distribution."""


class TruncationError(FockPhaseError, ValueError):
    """A truncated coefficient table drops more weight than allowed."""


class CapExceededError(FockPhaseError, ValueError):
    """An exact oracle was asked for a problem beyond its size cap."""


class NoOrientationError(FockPhaseError, ValueError):
    """The target point has no overlap between the two modes."""


class ConfigValidationError(FockPhaseError, ValueError):
    """Raised with the full list of ``(path, message)`` problems in a config."""

    def __init__(self, errors):
        self.errors = list(errors)
        lines = [f"{path}: {msg}" for path, msg in self.errors]
        super().__init__("invalid configuration:\n  " + "\n  ".join(lines))
