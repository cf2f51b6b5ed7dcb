"""Exception types raised across the package."""


class ShapeValidationError(ValueError):
    """A shape failed construction-time validation."""


class DomainError(ValueError):
    """A time or parameter lies outside the valid domain."""


class ConstructionError(ValueError):
    """A trajectory could not be constructed (singular system, bad durations)."""


class NonConvergenceError(RuntimeError):
    """GSIP iteration budget exhausted."""

    def __init__(self, message: str, radius: float, violation: float) -> None:
        super().__init__(message)
        self.radius = radius
        self.violation = violation


class ConsistencyError(RuntimeError):
    """Internal invariant broken, e.g. a negative GSIP radius."""


class PlanningError(RuntimeError):
    pass


class NoPathError(PlanningError):
    pass


class InvalidStartError(PlanningError):
    pass


class InvalidGoalError(PlanningError):
    pass


class SceneParseError(ValueError):
    """Malformed scene file; the message carries the line or byte offset."""
