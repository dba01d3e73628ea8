from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, MutableMapping, Optional, Sequence, Tuple

import numpy as np

from .constants import EquilibriumKind, MetricKind
from .errors import InvalidArgument
from .types import TrialRow

log = logging.getLogger("echochamber")

__all__ = [
    "polarization",
    "extremism",
    "consensus_indicator",
    "consensus_interval",
    "MetricSeries",
    "TrialResult",
    "TrialResults",
]


def polarization(opinions: np.ndarray, left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Mean opinion of the right block minus that of the left block, along the last axis."""
    return opinions[..., right].mean(axis=-1) - opinions[..., left].mean(axis=-1)


def extremism(opinions: np.ndarray, norm: str = "l1") -> np.ndarray:
    """Equal-weight distance of the opinions from neutral: mean |x| (l1) or root mean square (l2)."""
    if norm == "l1":
        return np.abs(opinions).mean(axis=-1)
    if norm == "l2":
        return np.sqrt((opinions * opinions).mean(axis=-1))
    raise InvalidArgument(f"unknown extremism norm {norm!r}, use l1 or l2")


def consensus_indicator(kind: EquilibriumKind) -> int:
    return int(kind.is_consensus)


def consensus_interval(probability: float, trials: int) -> Tuple[float, float]:
    """p +- 2 sqrt(p (1 - p) / N), clipped to [0, 1]."""
    if trials < 1:
        raise InvalidArgument("a consensus interval needs at least one trial")
    half_width = 2.0 * math.sqrt(probability * (1.0 - probability) / trials)
    return max(0.0, probability - half_width), min(1.0, probability + half_width)


@dataclass(frozen=True, eq=False)
class MetricSeries:
    kind: MetricKind
    values: np.ndarray
    quantiles: Dict[float, Optional[float]] = field(default_factory=dict)

    @classmethod
    def from_values(cls, kind: MetricKind, values: Iterable[float], percentiles: Sequence[float] = ()):
        values = np.asarray(list(values), dtype=np.float64)
        quantiles = {
            p: (float(np.percentile(values, p)) if values.size else None) for p in percentiles
        }
        return cls(kind=kind, values=values, quantiles=quantiles)

    def __len__(self):
        return self.values.shape[0]

    @property
    def mean(self) -> Optional[float]:
        return float(self.values.mean()) if self.values.size else None

    @property
    def sd(self) -> Optional[float]:
        return float(self.values.std()) if self.values.size else None


@dataclass(frozen=True)
class TrialResult:
    """Outcome of one (graph, initial opinions) draw."""

    trial: int
    b: float
    h: float
    kind: EquilibriumKind
    polarization: Optional[float]
    extremism: Optional[float]
    settle_time: Optional[float]
    failed: bool = False

    @property
    def converged(self) -> bool:
        return not self.failed and self.kind.converged

    def to_row(self) -> TrialRow:
        return TrialRow(
            trial=self.trial,
            b=self.b,
            h=self.h,
            kind=str(self.kind),
            converged=self.converged,
            failed=self.failed,
            polarization=self.polarization,
            extremism=self.extremism,
            settle_time=self.settle_time,
        )

    @classmethod
    def failure(cls, trial: int, b: float, h: float) -> TrialResult:
        return cls(
            trial=trial,
            b=b,
            h=h,
            kind=EquilibriumKind.non_convergent,
            polarization=None,
            extremism=None,
            settle_time=None,
            failed=True,
        )


class TrialResults:
    """
    Trial outcomes grouped by (b, h) cell.

    Adding is order independent: each cell is kept sorted by trial index.
    Non-converged trials are counted but left out of every conditional statistic.
    """

    def __init__(self):
        self._cells: MutableMapping[Tuple[float, float], Dict[int, TrialResult]] = {}

    def add_result(self, result: TrialResult):
        cell = self._cells.setdefault((result.b, result.h), {})
        if result.trial in cell:
            log.debug("Replacing result of trial %d at b=%r h=%r", result.trial, result.b, result.h)
        cell[result.trial] = result

    def extend(self, results: Iterable[TrialResult]):
        for result in results:
            self.add_result(result)

    def cells(self) -> List[Tuple[float, float]]:
        return sorted(self._cells)

    def get(self, b: float, h: float) -> List[TrialResult]:
        cell = self._cells.get((b, h), {})
        return [cell[i] for i in sorted(cell)]

    def __iter__(self):
        for key in self.cells():
            yield from self.get(*key)

    def __len__(self):
        return sum(len(i) for i in self._cells.values())

    @property
    def failed(self) -> int:
        return sum(1 for i in self if i.failed)

    @property
    def success_ratio(self) -> float:
        total = len(self)
        return 1.0 if not total else (total - self.failed) / total

    def converged(self, b: float, h: float) -> List[TrialResult]:
        return [i for i in self.get(b, h) if i.converged]

    def nonconverged(self, b: float, h: float) -> int:
        return sum(1 for i in self.get(b, h) if not i.failed and not i.converged)

    def persistent(self, b: float, h: float) -> List[TrialResult]:
        return [i for i in self.converged(b, h) if i.kind is EquilibriumKind.persistent_disagreement]

    def consensus(self, b: float, h: float) -> List[TrialResult]:
        return [i for i in self.converged(b, h) if i.kind.is_consensus]

    def series(
        self, metric: MetricKind, trials: Iterable[TrialResult], percentiles: Sequence[float] = ()
    ) -> MetricSeries:
        if metric is MetricKind.consensus_indicator:
            values = [consensus_indicator(i.kind) for i in trials]
        else:
            values = [getattr(i, metric.value) for i in trials]
        return MetricSeries.from_values(metric, values, percentiles)

    def rows(self) -> List[TrialRow]:
        return [i.to_row() for i in self]
