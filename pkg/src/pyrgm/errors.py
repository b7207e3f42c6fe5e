"""
This module defines the exceptions raised by `pyrgm`.

Every exception derives from [`PyrgmError`][pyrgm.errors.PyrgmError], so callers can catch everything
the package raises on purpose with a single `except` clause. The command line maps each family
to an exit code (see [`pyrgm.cli`][pyrgm.cli]).
"""

from typing import Any, Dict, List, Optional


class PyrgmError(Exception):
    """Base class for every error raised by `pyrgm`."""


class ParameterError(PyrgmError, ValueError):
    """An argument is out of its accepted range, or shapes do not match."""


class DegenerateSampleError(PyrgmError):
    """A generated sample has too few points to be usable."""


class DegenerateGeometryError(PyrgmError):
    """A rigid transform cannot be estimated from the given correspondences."""


class NumericError(PyrgmError, ArithmeticError):
    """A computation produced or received non-finite values."""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None) -> None:
        """
        Initialization method.

        Arguments:
            message: The error message.
            diagnostics: Optional values helping to understand the failure (dumped by the training loop).
        """
        super().__init__(message)
        self.diagnostics = diagnostics or {}
        """Values recorded at the time of the failure."""


class FormatError(PyrgmError):
    """A file does not follow the expected format."""


class CorruptionError(FormatError):
    """A weights file is truncated or internally inconsistent."""


class ConfigError(PyrgmError):
    """A configuration file failed validation."""

    def __init__(self, errors: List[str]) -> None:
        """
        Initialization method.

        Arguments:
            errors: One message per violation, each naming the key path and the accepted range.
        """
        super().__init__("; ".join(errors))
        self.errors = errors
        """The validation messages."""
