from __future__ import annotations

import argparse
import logging
import os
import sys
from abc import ABC
from pathlib import Path
from typing import Any, Dict, List, Optional, TextIO

from . import __version__
from .constants import LOG_LEVEL_ENV, ExitCode
from .converters import NoExitParser
from .errors import (
    ArgParserFailure,
    ConfigError,
    EchoChamberError,
    GraphParseError,
    InvalidArgument,
    NumericalFailure,
    PreconditionViolation,
)
from .experimentcommands import ExperimentCommands
from .graphcommands import GraphCommands
from .helpers import dumps, output_dir, utc_stamp
from .manifest import RunManifest
from .sbmcommands import SbmCommands
from .twoagentcommands import TwoAgentCommands

log = logging.getLogger("echochamber")

LOG_LEVELS = [logging.WARNING, logging.INFO, logging.DEBUG]


class CompositeMetaClass(type(ABC)):
    """
    This allows the metaclass used for proper type detection to
    coexist with the command mixins.
    """

    pass


class EchoChamber(
    TwoAgentCommands,
    SbmCommands,
    ExperimentCommands,
    GraphCommands,
    metaclass=CompositeMetaClass,
):
    """Opinion dynamics under platform influence, from the command line."""

    __version__ = __version__

    def __init__(self, stdout: Optional[TextIO] = None):
        self.stdout = stdout or sys.stdout
        self.output_dir: Optional[Path] = None
        self.stamp: Optional[str] = None
        self._stamp: Optional[str] = None
        self.parser = self.build_parser()

    def build_parser(self) -> NoExitParser:
        parser = NoExitParser(
            prog="echochamber",
            description="Simulate and analyse opinion dynamics nudged by a recommendation platform.",
        )
        parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
        parser.add_argument(
            "--output-dir",
            default=None,
            help="Where files are written (default $ECHOCHAMBER_OUTPUT_DIR, else ./output).",
        )
        parser.add_argument(
            "-v", "--verbose", action="count", default=0, help="Log more: -v for info, -vv for debug."
        )
        parser.add_argument(
            "--stamp",
            default=None,
            help="Fixed file name stamp instead of the current UTC time, for reproducible file names.",
        )
        subparsers = parser.add_subparsers(dest="command", metavar="{two-agent,sbm,experiment,graph}")
        subparsers.required = True
        self.add_two_agent_parser(subparsers)
        self.add_sbm_parser(subparsers)
        self.add_experiment_parser(subparsers)
        self.add_graph_parser(subparsers)
        return parser

    def emit(self, text: str) -> None:
        self.stdout.write(text.rstrip("\n") + "\n")

    def emit_json(self, data: Any) -> None:
        self.emit(dumps(data))

    def output_directory(self) -> Path:
        return output_dir(self.output_dir)

    def output_path(self, stem: str, suffix: str) -> Path:
        return self.output_directory() / f"{stem}{suffix}"

    def run_stamp(self) -> str:
        if self._stamp is None:
            self._stamp = self.stamp or utc_stamp()
        return self._stamp

    def new_manifest(self, args: argparse.Namespace, config: Dict[str, Any], seed: Optional[int] = None) -> RunManifest:
        command = " ".join(i for i in (args.command, getattr(args, "subcommand", None)) if i)
        return RunManifest(command=command, config=config, seed=seed).start()

    def close_manifest(self, manifest: RunManifest, stem: str) -> Path:
        manifest.finish()
        return manifest.write(self.output_path(stem, ".json"))

    def run(self, argv: Optional[List[str]] = None) -> int:
        try:
            args = self.parser.parse_args(argv)
        except ArgParserFailure as exc:
            self.parser.print_usage(sys.stderr)
            sys.stderr.write(f"{exc.cmd}: error: {exc}\n")
            return ExitCode.usage
        setup_logging(args.verbose)
        self.output_dir = Path(args.output_dir) if args.output_dir else None
        self.stamp = args.stamp
        self._stamp = None
        try:
            return int(args.handler(args))
        except (ArgParserFailure, ConfigError, GraphParseError, InvalidArgument, PreconditionViolation) as exc:
            sys.stderr.write(f"echochamber: error: {exc}\n")
            return ExitCode.usage
        except NumericalFailure as exc:
            log.error("Numerical failure at t=%r: %s", exc.time, exc)
            return ExitCode.numerical_failure
        except EchoChamberError as exc:
            sys.stderr.write(f"echochamber: error: {exc}\n")
            return ExitCode.usage


def setup_logging(verbosity: int = 0) -> None:
    """-v raises WARNING to INFO, -vv to DEBUG; $ECHOCHAMBER_LOG_LEVEL sets the starting level."""
    base = os.environ.get(LOG_LEVEL_ENV, "WARNING").upper()
    level = logging.getLevelName(base)
    if not isinstance(level, int):
        level = logging.WARNING
    if verbosity:
        level = min(level, LOG_LEVELS[min(verbosity, len(LOG_LEVELS) - 1)])
    logging.basicConfig(format="%(asctime)s %(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    log.setLevel(level)


def main(argv: Optional[List[str]] = None) -> int:
    return EchoChamber().run(argv)
