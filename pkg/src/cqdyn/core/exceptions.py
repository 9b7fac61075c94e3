"""Custom exception classes and exit-code handlers."""

from typing import Any

from cqdyn.core.logging import get_logger

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_MONITOR_ABORT = 2
EXIT_CONFIG = 3
EXIT_CAPACITY = 4


class CQDynError(Exception):
    """Base exception class for toolkit-specific exceptions."""

    def __init__(
        self,
        message: str,
        exit_code: int = EXIT_INTERNAL,
        details: dict[str, Any] | None = None,
    ) -> None:
        """Initialize the exception.

        Args:
            message: Error message
            exit_code: Process exit code reported by the command line front end
            details: Additional error details
        """
        self.message = message
        self.exit_code = exit_code
        self.details = details or {}
        super().__init__(self.message)


class ConfigError(CQDynError):
    """Exception raised when a scenario or grid specification is malformed."""

    def __init__(self, message: str = "Invalid configuration", key: str | None = None,
                 details: dict[str, Any] | None = None) -> None:
        """Initialize the exception.

        Args:
            message: Error message
            key: Dotted configuration key at fault, e.g. ``integration.dt``
            details: Additional error details
        """
        merged = dict(details or {})
        if key is not None:
            merged["key"] = key
            message = f"{key}: {message}"
        self.key = key
        super().__init__(message, exit_code=EXIT_CONFIG, details=merged)


class MonitorAbortError(CQDynError):
    """Exception raised when an evolution monitor crosses its abort threshold."""

    def __init__(self, message: str, time: float, details: dict[str, Any] | None = None) -> None:
        """Initialize the exception.

        Args:
            message: Error message
            time: Model time at which the monitor tripped
            details: Additional error details
        """
        self.time = time
        super().__init__(message, exit_code=EXIT_MONITOR_ABORT, details={**(details or {}), "time": time})


class CapacityError(CQDynError):
    """Exception raised when a dense object would exceed the desk-scale cap."""

    def __init__(self, message: str = "Capacity exceeded", details: dict[str, Any] | None = None) -> None:
        super().__init__(message, exit_code=EXIT_CAPACITY, details=details)


class InvalidDimensionError(CQDynError):
    """Exception raised for unsupported Hilbert-space dimensions."""


class ShapeError(CQDynError):
    """Exception raised when operand shapes do not match."""


class NormalizationError(CQDynError):
    """Exception raised when a vector that must be normalized is not."""


class ContractViolationError(CQDynError):
    """Exception raised when an input breaks an operation's precondition."""


class DomainError(CQDynError):
    """Exception raised for arguments outside the supported domain."""


class ResolutionError(CQDynError):
    """Exception raised when a grid is too coarse for a finite-difference stencil."""


class UnsupportedOrderError(CQDynError):
    """Exception raised for moment orders above two."""


class SpecValidationError(CQDynError):
    """Exception raised when a coupling specification violates positivity or Hermiticity."""


class NumericalBlowupError(CQDynError):
    """Exception raised when an integration step produces non-finite values."""


class GeneratorValidityError(CQDynError):
    """Exception raised when a generator has spectrum incompatible with CP dynamics."""


class UnsupportedSymmetryError(CQDynError):
    """Exception raised when a symmetry cannot be applied to a generator."""


class OutputValidationError(CQDynError):
    """Exception raised when a written output file fails its schema check."""


def handle_toolkit_error(exc: CQDynError) -> int:
    """Handle toolkit exceptions at the process boundary.

    Args:
        exc: The exception instance

    Returns:
        Exit code for the process
    """
    logger.error(
        "Toolkit exception occurred",
        error=exc.message,
        error_type=type(exc).__name__,
        exit_code=exc.exit_code,
        details=exc.details,
    )
    return exc.exit_code


def handle_unexpected_error(exc: Exception) -> int:
    """Handle unexpected exceptions at the process boundary.

    Args:
        exc: The exception instance

    Returns:
        Exit code for the process
    """
    logger.error("Unexpected exception occurred", exc_info=exc)
    return EXIT_INTERNAL
