from __future__ import annotations

import argparse
from abc import ABC, abstractmethod
from pathlib import Path
from typing import TYPE_CHECKING, Any, Dict, Optional, TextIO

if TYPE_CHECKING:
    from .constants import ExitCode
    from .manifest import RunManifest


class CommandMixin(ABC):
    """
    Base class for well behaved type hint detection with composite class.

    Basically, to keep developers sane when not all attributes are defined in each mixin.
    """

    def __init__(self, *_args):
        self.stdout: TextIO
        self.output_dir: Optional[Path]
        self.stamp: Optional[str]

    #######################################################################
    # cli.py                                                              #
    #######################################################################

    @abstractmethod
    def emit(self, text: str) -> None:
        raise NotImplementedError()

    @abstractmethod
    def emit_json(self, data: Any) -> None:
        raise NotImplementedError()

    @abstractmethod
    def output_directory(self) -> Path:
        raise NotImplementedError()

    @abstractmethod
    def output_path(self, stem: str, suffix: str) -> Path:
        raise NotImplementedError()

    @abstractmethod
    def run_stamp(self) -> str:
        raise NotImplementedError()

    @abstractmethod
    def new_manifest(self, args: argparse.Namespace, config: Dict[str, Any], seed: Optional[int] = None) -> RunManifest:
        raise NotImplementedError()

    @abstractmethod
    def close_manifest(self, manifest: RunManifest, stem: str) -> Path:
        raise NotImplementedError()

    #######################################################################
    # experimentcommands.py                                               #
    #######################################################################

    @abstractmethod
    def run_configured_experiment(
        self, args: argparse.Namespace, overrides: Dict[str, Any], command: str
    ) -> ExitCode:
        raise NotImplementedError()

    @staticmethod
    @abstractmethod
    def add_run_args(parser: argparse.ArgumentParser) -> None:
        raise NotImplementedError()

    @staticmethod
    @abstractmethod
    def overrides_from(args: argparse.Namespace) -> Dict[str, Any]:
        raise NotImplementedError()
