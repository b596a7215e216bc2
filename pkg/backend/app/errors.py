"""
Exception types raised by the toolkit.
"""
from typing import Optional


class TentlabError(Exception):
    """Base class for all toolkit errors."""


class ParameterError(TentlabError, ValueError):
    """A precondition on an argument was violated (exponent, radius, depth...)."""


class DegenerateInputError(TentlabError):
    """An input makes a ratio meaningless, e.g. a zero denominator norm."""


class UnsupportedFamilyError(TentlabError):
    """A sublinear operator family was passed where linearity is required."""


class ConfigError(TentlabError):
    """Invalid suite configuration, optionally tied to a line of the source file."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.message = message
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def require(condition: bool, message: str) -> None:
    """Raise ParameterError with `message` unless `condition` holds."""
    if not condition:
        raise ParameterError(message)
