from __future__ import annotations

import argparse
import enum
import logging
import math
import re
from typing import List

from .errors import ArgParserFailure

log = logging.getLogger("echochamber")

__all__ = [
    "NoExitParser",
    "EnumAction",
    "finite_float",
    "positive_float",
    "probability",
    "unit_interval_open",
    "positive_int",
    "float_list",
]

LIST_SPLIT = re.compile(r"[,\s]+")


class NoExitParser(argparse.ArgumentParser):
    """Raise instead of exiting so the caller decides the exit code."""

    def error(self, message):
        raise ArgParserFailure(self.prog, message)


class EnumAction(argparse.Action):
    """
    Handle Enum conversion in argparse
    https://stackoverflow.com/a/60750535
    """

    def __init__(self, **kwargs):
        # Pop off the type value
        enum_type = kwargs.pop("type", None)

        # Ensure an Enum subclass is provided
        if enum_type is None:
            raise ValueError("type must be assigned an Enum when using EnumAction")
        if not issubclass(enum_type, enum.Enum):
            raise TypeError("type must be an Enum when using EnumAction")

        kwargs.setdefault("choices", tuple(str(i.value) for i in enum_type))
        super().__init__(**kwargs)
        self._enum = enum_type

    def __call__(self, parser, namespace, values, option_string=None):
        # Convert value back into an Enum
        if isinstance(values, (list, tuple)):
            value = [self._enum.get_from_name(v) for v in values]
        else:
            value = self._enum.get_from_name(values)
        log.debug("%s -> %r", self.dest, value)
        setattr(namespace, self.dest, value)


def finite_float(argument: str) -> float:
    try:
        value = float(argument)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{argument!r} is not a number")
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"{argument!r} must be finite")
    return value


def positive_float(argument: str) -> float:
    value = finite_float(argument)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"{argument!r} must be positive")
    return value


def probability(argument: str) -> float:
    value = finite_float(argument)
    if not 0 <= value <= 1:
        raise argparse.ArgumentTypeError(f"{argument!r} must lie in [0, 1]")
    return value


def unit_interval_open(argument: str) -> float:
    value = finite_float(argument)
    if not 0 < value < 1:
        raise argparse.ArgumentTypeError(f"{argument!r} must lie in (0, 1)")
    return value


def positive_int(argument: str) -> int:
    try:
        value = int(argument)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{argument!r} is not an integer")
    if value < 1:
        raise argparse.ArgumentTypeError(f"{argument!r} must be at least 1")
    return value


def float_list(argument: str) -> List[float]:
    """``0.5,1,2`` or ``"0.5 1 2"`` -> [0.5, 1.0, 2.0], all positive."""
    parts = [i for i in LIST_SPLIT.split(argument.strip()) if i]
    if not parts:
        raise argparse.ArgumentTypeError("expected at least one value")
    return [positive_float(i) for i in parts]
