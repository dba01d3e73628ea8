from __future__ import annotations

from pathlib import Path
from typing import Optional, Union

__all__ = [
    "EchoChamberError",
    "InvalidArgument",
    "PreconditionViolation",
    "NumericalFailure",
    "GraphParseError",
    "ConfigError",
    "ArgParserFailure",
]


class EchoChamberError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgument(EchoChamberError, ValueError):
    """Raised when an operation receives arguments outside its domain."""


class PreconditionViolation(EchoChamberError):
    """Raised when an input is well formed but the operation is not defined for it."""


class NumericalFailure(EchoChamberError, ArithmeticError):
    """Raised when integration produces non-finite values."""

    def __init__(self, time: float, message: Optional[str] = None):
        self.time = time
        super().__init__(message or f"non-finite opinion encountered at t={time!r}")


class GraphParseError(EchoChamberError):
    """Raised when an edge-list or labels file cannot be parsed."""

    def __init__(self, path: Union[str, Path], line_number: int, message: str):
        self.path = str(path)
        self.line_number = line_number
        super().__init__(f"{self.path}:{line_number}: {message}")


class ConfigError(EchoChamberError):
    """Raised when a configuration file is missing or does not validate."""


class ArgParserFailure(EchoChamberError):
    """Raised when parsing a command line fails."""

    def __init__(self, cmd: str, message: str):
        self.cmd = cmd
        super().__init__(message)
