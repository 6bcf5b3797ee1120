"""
Exception hierarchy and CLI error mapping for PyDIFS.

Every domain error carries a short machine-readable code and the process
exit status the command line reports for it:

    1 = input error, 2 = budget, 3 = convergence failure, 4 = I/O
"""

import logging

from django.core.management.base import CommandError

logger = logging.getLogger(__name__)

EXIT_INPUT_ERROR = 1
EXIT_BUDGET = 2
EXIT_CONVERGENCE = 3
EXIT_IO = 4


class PyDifsException(Exception):
    """
    Custom base exception for PyDIFS-specific errors.

    Subclasses fix the error code and exit status; callers only pass the
    message and any structured context.
    """
    default_code = 'PYDIFS_ERROR'
    exit_code = EXIT_INPUT_ERROR

    def __init__(self, message, code=None):
        self.message = message
        self.code = code or self.default_code
        super().__init__(message)


class InvalidInputError(PyDifsException):
    """Exception for malformed numeric input (non-finite coordinates, bad parameters)."""
    default_code = 'INVALID_INPUT'


class DimensionMismatchError(InvalidInputError):
    """Exception for maps, points and grids of different dimension."""
    default_code = 'DIMENSION_MISMATCH'


class UnsupportedDimensionError(InvalidInputError):
    """Exception for operations restricted to a fixed dimension."""
    default_code = 'UNSUPPORTED_DIMENSION'


class RegionNotClosedError(InvalidInputError):
    """Exception for a map sending a region point outside the region."""
    default_code = 'REGION_NOT_CLOSED'

    def __init__(self, message, point=None, image=None):
        super().__init__(message)
        self.point = point
        self.image = image


class NoUniqueFixedPointError(InvalidInputError):
    """Exception for affine maps whose linear part has eigenvalue 1."""
    default_code = 'NO_UNIQUE_FIXED_POINT'


class NotAContractionError(InvalidInputError):
    """Exception for maps whose contractivity factor is not below 1."""
    default_code = 'NOT_A_CONTRACTION'


class OrbitEscapeError(InvalidInputError):
    """Exception for an orbit leaving the tabulated region of a DIFS."""
    default_code = 'ORBIT_ESCAPE'


class BoundUnavailableError(InvalidInputError):
    """Exception for an attractor bound with no map admitting a minimal absorbing set."""
    default_code = 'BOUND_UNAVAILABLE'


class ConfigValidationError(InvalidInputError):
    """Exception for run configurations failing schema validation."""
    default_code = 'CONFIG_INVALID'

    def __init__(self, message, field_errors=None):
        super().__init__(message)
        self.field_errors = field_errors or {}


class BudgetExceededError(PyDifsException):
    """Exception for computations refused or aborted by a resource budget."""
    default_code = 'BUDGET_EXCEEDED'
    exit_code = EXIT_BUDGET


class DivergenceError(BudgetExceededError):
    """Exception for an orbit that does not reach the analyzed region within the cap."""
    default_code = 'DIVERGENCE'


class RejectionStallError(BudgetExceededError):
    """Exception for a conditional sampler that keeps rejecting."""
    default_code = 'REJECTION_STALL'


class ConvergenceFailureError(PyDifsException):
    """Exception for iterative solvers that miss their residual target."""
    default_code = 'CONVERGENCE_FAILURE'
    exit_code = EXIT_CONVERGENCE


class ArtifactWriteError(PyDifsException):
    """Exception for output files that cannot be written."""
    default_code = 'ARTIFACT_WRITE_FAILED'
    exit_code = EXIT_IO


class ArtifactReadError(PyDifsException):
    """Exception for input files (scene tables, configs) that cannot be read."""
    default_code = 'ARTIFACT_READ_FAILED'
    exit_code = EXIT_IO


def exit_code_for(exc):
    """Get the process exit status for an exception."""
    if isinstance(exc, PyDifsException):
        return exc.exit_code
    if isinstance(exc, OSError):
        return EXIT_IO
    return EXIT_INPUT_ERROR


def command_error_for(exc):
    """
    Convert an exception raised during a run into a CommandError.

    Domain errors are logged as warnings with their code; anything else is
    unexpected and logged with its traceback.

    Args:
        exc: The exception instance

    Returns:
        CommandError: carrying the mapped exit status as returncode
    """
    returncode = exit_code_for(exc)
    if isinstance(exc, PyDifsException):
        logger.warning(f"Run failed with {exc.code}: {exc.message}")
        detail = exc.message
        if isinstance(exc, ConfigValidationError) and exc.field_errors:
            detail = '; '.join(f"{path}: {', '.join(msgs)}" for path, msgs in sorted(exc.field_errors.items()))
        return CommandError(f"{exc.code}: {detail}", returncode=returncode)

    logger.error(f"Unhandled exception during run: {exc}", exc_info=exc)
    return CommandError(f"INTERNAL_ERROR: {exc}", returncode=returncode)
