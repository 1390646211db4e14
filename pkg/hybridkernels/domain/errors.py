"""Exception hierarchy and error classification for hybridkernels.

Every library error derives from KernelError and carries an optional
``details`` string with the offending shapes or parameters. The CLI maps
errors to exit codes through classify_error.
"""

import logging
from enum import Enum
from typing import Optional

logger = logging.getLogger(__name__)


class KernelError(Exception):
    """Base class for all library errors."""

    def __init__(self, message: str, details: Optional[str] = None):
        super().__init__(message)
        self.details = details

    def __str__(self) -> str:
        message = super().__str__()
        if self.details:
            return f"{message} ({self.details})"
        return message


class ShapeError(KernelError):
    """Operand shapes do not conform, or an extent is not a power of two."""


class DegenerateSplitError(KernelError):
    """A view of side 1 cannot be halved."""


class InvalidPlaneCountError(KernelError):
    """Plane count r is outside the legal range for the kernel."""


class UnsupportedContractionError(KernelError):
    """Contraction with an empty index group (pure outer product)."""


class RankVectorError(KernelError):
    """A rank vector is not a permutation of 1..d."""


class CacheConfigError(KernelError):
    """Ideal-cache parameters are inconsistent."""


class UnknownAlgorithmError(KernelError):
    """Algorithm or kernel name is not registered."""


class TraceFormatError(KernelError):
    """A binary tensor or trace file is malformed."""


class RaceConditionError(KernelError):
    """A task tree failed the disjoint-write check before parallel execution."""


class ErrorCategory(Enum):
    """Classification of errors for exit-code decisions."""

    USAGE = "usage"  # Bad parameters or unknown names
    FAILURE = "failure"  # Verification, race or I/O failure


USAGE_ERROR_TYPES: tuple[type[Exception], ...] = (
    ShapeError,
    DegenerateSplitError,
    InvalidPlaneCountError,
    UnsupportedContractionError,
    RankVectorError,
    CacheConfigError,
    UnknownAlgorithmError,
    ValueError,
)

EXIT_CODES = {
    ErrorCategory.USAGE: 2,
    ErrorCategory.FAILURE: 1,
}


def classify_error(exception: BaseException) -> ErrorCategory:
    """Classify an exception to decide how the CLI reports it.

    Args:
        exception: The exception to classify

    Returns:
        ErrorCategory.USAGE for parameter problems, FAILURE otherwise
    """
    if isinstance(exception, USAGE_ERROR_TYPES):
        return ErrorCategory.USAGE
    if not isinstance(exception, (KernelError, OSError)):
        logger.warning("Unclassified error %s: %s", type(exception).__name__, exception)
    return ErrorCategory.FAILURE


def exit_code_for(exception: BaseException) -> int:
    """Get the process exit code for an exception."""
    return EXIT_CODES[classify_error(exception)]


def describe_error(exception: BaseException) -> str:
    """Get a one-line human-readable message for an exception.

    Args:
        exception: The exception to describe

    Returns:
        Message prefixed with the error kind
    """
    if isinstance(exception, OSError):
        target = exception.filename or "file"
        return f"I/O error on {target}: {exception.strerror or exception}"
    if isinstance(exception, KernelError):
        kind = type(exception).__name__
        return f"{kind}: {exception}"
    return f"Unexpected error: {exception}"
