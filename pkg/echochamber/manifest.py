from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from . import __version__
from .config import config_digest
from .errors import EchoChamberError
from .helpers import write_json
from .types import Manifest

log = logging.getLogger("echochamber")

__all__ = ["RunManifest"]


@dataclass
class RunManifest:
    """
    Record of one command run: resolved config, its digest, the seed and every file written.

    ``start`` and ``finish`` are called around the work; ``write`` refuses to
    list outputs that do not exist.
    """

    command: str
    config: Dict[str, Any] = field(default_factory=dict)
    seed: Optional[int] = None
    outputs: List[str] = field(default_factory=list)
    started: Optional[str] = None
    finished: Optional[str] = None
    wall_time: float = 0.0
    trials: int = 0
    failed_trials: int = 0
    notes: Dict[str, Any] = field(default_factory=dict)
    _clock: float = field(default=0.0, repr=False)

    @property
    def config_digest(self) -> str:
        return config_digest(self.config)

    def start(self) -> RunManifest:
        self.started = datetime.now(timezone.utc).isoformat(timespec="seconds")
        self._clock = time.perf_counter()
        return self

    def finish(self) -> RunManifest:
        self.finished = datetime.now(timezone.utc).isoformat(timespec="seconds")
        self.wall_time = time.perf_counter() - self._clock
        return self

    def add_output(self, path: Union[str, Path]):
        self.outputs.append(str(path))

    def to_json(self) -> Manifest:
        return Manifest(
            command=self.command,
            version=__version__,
            config=self.config,
            config_digest=self.config_digest,
            seed=self.seed,
            outputs=list(self.outputs),
            started=self.started or "",
            finished=self.finished or "",
            wall_time=self.wall_time,
            trials=self.trials,
            failed_trials=self.failed_trials,
            notes=self.notes,
        )

    def write(self, path: Union[str, Path]) -> Path:
        missing = [i for i in self.outputs if not Path(i).exists()]
        if missing:
            raise EchoChamberError(f"manifest lists outputs that were not written: {', '.join(missing)}")
        path = Path(path)
        write_json(path, self.to_json())
        log.info("Wrote manifest %s", path)
        return path
