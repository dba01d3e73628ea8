from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Optional, Sequence, Tuple, Union

import numpy as np

from .constants import BlockLabel, Normalization
from .errors import InvalidArgument

log = logging.getLogger("echochamber")

__all__ = ["InfluenceGraph"]

ArrayLike = Union[np.ndarray, Sequence[Sequence[float]]]


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=np.float64, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class InfluenceGraph:
    """
    Weighted influence matrix a_ij (influence of j on i) with block labels.

    Instances are immutable: the weight matrix is copied and marked read-only.
    Use :meth:`from_adjacency` to build either normalization from a 0/1 adjacency.
    """

    weights: np.ndarray
    labels: Tuple[BlockLabel, ...] = ()
    normalization: Normalization = Normalization.unit_weight
    a: float = 1.0
    _adjacency: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        weights = _frozen(self.weights)
        if weights.ndim != 2 or weights.shape[0] != weights.shape[1]:
            raise InvalidArgument(f"influence matrix must be square, got shape {weights.shape}")
        if not np.isfinite(weights).all():
            raise InvalidArgument("influence matrix contains non-finite weights")
        if (weights < 0).any():
            raise InvalidArgument("influence weights must be non-negative")
        if np.any(np.diag(weights) != 0):
            raise InvalidArgument("influence matrix must have a zero diagonal")
        if not self.a > 0:
            raise InvalidArgument(f"influence budget a must be positive, got {self.a!r}")
        n = weights.shape[0]
        labels = tuple(self.labels) if self.labels else (BlockLabel.unlabeled,) * n
        if len(labels) != n:
            raise InvalidArgument(f"got {len(labels)} labels for {n} agents")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "labels", tuple(BlockLabel(i) for i in labels))
        if self._adjacency is None:
            object.__setattr__(self, "_adjacency", _frozen(weights > 0))
        else:
            object.__setattr__(self, "_adjacency", _frozen(self._adjacency))

    @classmethod
    def from_adjacency(
        cls,
        adjacency: ArrayLike,
        normalization: Normalization = Normalization.row_normalized,
        a: float = 1.0,
        labels: Optional[Iterable[BlockLabel]] = None,
    ) -> InfluenceGraph:
        """
        Build an influence graph from a 0/1 adjacency matrix.

        Row-normalized mode gives every neighbour of i the weight a/deg(i),
        so each non-isolated row sums to a. Unit-weight mode gives every edge
        the weight a. Isolated agents keep an all-zero row in both modes.
        """
        adjacency = np.asarray(adjacency, dtype=np.float64)
        if adjacency.ndim != 2 or adjacency.shape[0] != adjacency.shape[1]:
            raise InvalidArgument(f"adjacency must be square, got shape {adjacency.shape}")
        if not np.isin(adjacency, (0.0, 1.0)).all():
            raise InvalidArgument("adjacency entries must be 0 or 1")
        if not a > 0:
            raise InvalidArgument(f"influence budget a must be positive, got {a!r}")
        if normalization is Normalization.row_normalized:
            degrees = adjacency.sum(axis=1)
            scale = np.divide(a, degrees, out=np.zeros_like(degrees), where=degrees > 0)
            weights = adjacency * scale[:, None]
        else:
            weights = adjacency * a
        return cls(
            weights=weights,
            labels=tuple(labels) if labels is not None else (),
            normalization=normalization,
            a=a,
            _adjacency=adjacency,
        )

    @classmethod
    def pair(cls, a: float) -> InfluenceGraph:
        """The two-agent graph with a_12 = a_21 = a, agent 1 left and agent 2 right."""
        return cls.from_adjacency(
            [[0.0, 1.0], [1.0, 0.0]],
            normalization=Normalization.unit_weight,
            a=a,
            labels=(BlockLabel.left, BlockLabel.right),
        )

    @classmethod
    def directed_cycle(cls, n: int, a: float = 1.0) -> InfluenceGraph:
        """Agent i listens only to agent i+1 (and the last agent to the first)."""
        adjacency = np.roll(np.eye(n), 1, axis=1)
        return cls.from_adjacency(adjacency, normalization=Normalization.unit_weight, a=a)

    def __len__(self):
        return self.n

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @property
    def adjacency(self) -> np.ndarray:
        return self._adjacency

    @cached_property
    def laplacian(self) -> np.ndarray:
        laplacian = np.diag(self.weights.sum(axis=1)) - self.weights
        laplacian.setflags(write=False)
        return laplacian

    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1).astype(np.int64)

    def is_symmetric(self, tol: float = 1e-12) -> bool:
        return bool(np.allclose(self.weights, self.weights.T, rtol=0.0, atol=tol))

    def symmetrized(self) -> InfluenceGraph:
        """(A + A^T) / 2, keeping labels. Used to contrast directed and undirected influence."""
        adjacency = np.maximum(self.adjacency, self.adjacency.T)
        return InfluenceGraph(
            weights=(self.weights + self.weights.T) / 2.0,
            labels=self.labels,
            normalization=self.normalization,
            a=self.a,
            _adjacency=adjacency,
        )

    def block_indices(self, label: BlockLabel) -> np.ndarray:
        return np.array([i for i, lab in enumerate(self.labels) if lab is label], dtype=np.int64)

    @property
    def has_blocks(self) -> bool:
        return (
            BlockLabel.unlabeled not in self.labels
            and BlockLabel.left in self.labels
            and BlockLabel.right in self.labels
        )

    def block_degrees(self) -> Tuple[np.ndarray, np.ndarray]:
        """Per-agent count of same-block and cross-block neighbours."""
        if BlockLabel.unlabeled in self.labels:
            raise InvalidArgument("block degrees need every agent labeled L or R")
        signs = np.array([lab.sign for lab in self.labels])
        same_block = signs[:, None] == signs[None, :]
        same = (self.adjacency * same_block).sum(axis=1).astype(np.int64)
        cross = (self.adjacency * ~same_block).sum(axis=1).astype(np.int64)
        return same, cross

    def edges(self) -> Iterator[Tuple[int, int]]:
        """Undirected edges (i < j) of the support of the adjacency."""
        support = np.maximum(self.adjacency, self.adjacency.T)
        rows, cols = np.nonzero(np.triu(support, k=1))
        yield from zip(rows.tolist(), cols.tolist())
