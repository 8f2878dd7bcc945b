"""
Exception hierarchy for satatree. Errors that signal bad input also subclass ValueError, so code
that already catches ValueError around the format layer keeps working.
"""

from __future__ import annotations


class SataError(Exception):
    """Base class for every error raised by satatree."""


class DimensionError(SataError, ValueError):
    """Operand shapes do not agree."""


class NonFiniteError(SataError, ArithmeticError):
    """An operation produced NaN or Inf."""

    def __init__(self, message: str, op: str | None = None, coordinate: tuple | None = None):
        super().__init__(message)
        self.op = op
        self.coordinate = coordinate


class GradientError(SataError, ValueError):
    """Backward was called on something that cannot be differentiated."""


class TreeParseError(SataError, ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class TransitionError(SataError, ValueError):
    """A SHIFT/REDUCE program does not describe a single tree."""


class DatasetFormatError(SataError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")
        self.line = line


class ConfigError(SataError, ValueError):
    """A run configuration cannot be read or does not validate."""


class CheckpointError(SataError, ValueError):
    pass


class DivergenceError(SataError, RuntimeError):
    """Training loss became non-finite."""


__all__ = [
    "CheckpointError",
    "ConfigError",
    "DatasetFormatError",
    "DimensionError",
    "DivergenceError",
    "GradientError",
    "NonFiniteError",
    "SataError",
    "TransitionError",
    "TreeParseError",
]
