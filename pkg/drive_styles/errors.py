"""Exception hierarchy. Each class carries the CLI exit code it maps to."""

from typing import Optional


class DriveStyleError(Exception):
    """Base class for every error raised by drive_styles."""

    exit_code = 1


class ValidationError(DriveStyleError, ValueError):
    """Invalid configuration, arguments or preconditions."""

    exit_code = 2


class SchemaError(ValidationError):
    """Columns, feature labels or factor labels do not match."""


class RangeError(ValidationError):
    """A value lies outside its admissible range."""


class DataError(DriveStyleError, ValueError):
    """Malformed input data (timestamps, jitter, unmatched ids)."""

    exit_code = 3


class NumericalError(DriveStyleError, ArithmeticError):
    """Non-convergence or degenerate numerics."""

    exit_code = 4


class InternalConsistencyError(DriveStyleError, RuntimeError):
    """Sampler bookkeeping went wrong (negative counts)."""


class StageError(DriveStyleError):
    """A pipeline stage failed; wraps the original cause."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"Stage '{stage}' failed: {cause}")

    @property
    def exit_code(self) -> int:  # type: ignore[override]
        return getattr(self.cause, "exit_code", 1)


def exit_code_for(error: BaseException, default: Optional[int] = 1) -> int:
    """Exit code for any exception, falling back to ``default``."""
    return getattr(error, "exit_code", default)
