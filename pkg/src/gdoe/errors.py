"""Exception hierarchy shared across the package.

Every error raised on purpose derives from GdoeError so callers (CLI,
HTTP service) can map failures to exit codes / status codes uniformly.
"""


class GdoeError(Exception):
    """Base class for all package errors."""

    code = "internal"


class ValidationError(GdoeError):
    """Invalid input value or configuration."""

    code = "validation"


class SizeError(ValidationError):
    """An enumeration would exceed the configured size cap."""

    code = "size"


class ConstraintParseError(ValidationError):
    """Syntax or name-resolution failure in a constraint expression."""

    code = "constraint-parse"

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message)
        self.offset = offset


class ShapeError(ValidationError):
    """Array shape does not match the declared contract."""

    code = "shape"


class NumericError(GdoeError):
    """Non-finite value encountered where finite math is required."""

    code = "numeric"


class TrainingError(GdoeError):
    """Model fitting diverged or could not proceed."""

    code = "training"

    def __init__(self, message: str, epoch: int | None = None):
        super().__init__(message)
        self.epoch = epoch


class TriangulationError(GdoeError):
    """Scattered points admit no valid triangulation."""

    code = "triangulation"


class ProjectError(GdoeError):
    """Project file missing, malformed, or in the wrong state."""

    code = "project"
