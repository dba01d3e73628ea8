from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np

from .constants import DEFAULT_EPSILON, DEFAULT_STEP, BlockLabel, Normalization
from .dynamics import OpinionState, PlatformParams, Trajectory, make_field, run_rk4, step_guard
from .errors import GraphParseError, InvalidArgument
from .graph import InfluenceGraph
from .rng import Random, Stream, TrialSeed
from .twoagent import ClassificationResult, TwoAgentSystem, classify

log = logging.getLogger("echochamber")

__all__ = [
    "SbmConfig",
    "ConcentrationCheck",
    "EnvelopeState",
    "EnvelopeTrajectory",
    "EnvelopeCheck",
    "generate_sbm",
    "concentration_check",
    "concentration_bound",
    "concentration_bound_union",
    "mean_field_prediction",
    "integrate_envelopes",
    "envelope_contains",
    "block_means",
    "load_labeled_graph",
    "write_labeled_graph",
]

PathLike = Union[str, Path]


def _probability(name: str, value: float):
    if not 0.0 <= value <= 1.0:
        raise InvalidArgument(f"{name} must be a probability, got {value!r}")


def _delta(delta: float, allow_zero: bool = False):
    low_ok = delta >= 0 if allow_zero else delta > 0
    if not (low_ok and delta < 1):
        raise InvalidArgument(f"delta must lie in {'[0, 1)' if allow_zero else '(0, 1)'}, got {delta!r}")


@dataclass(frozen=True)
class SbmConfig:
    """
    Two-block stochastic block model: n agents per block, edge probability
    p inside a block and q across blocks.
    """

    n: int
    p: float
    q: float
    normalization: Normalization = Normalization.row_normalized
    a: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise InvalidArgument(f"n must be a positive integer, got {self.n!r}")
        _probability("p", self.p)
        _probability("q", self.q)
        if not self.a > 0:
            raise InvalidArgument(f"a must be positive, got {self.a!r}")
        if not isinstance(self.normalization, Normalization):
            object.__setattr__(self, "normalization", Normalization.get_from_name(str(self.normalization)))

    @property
    def beta(self) -> float:
        """Limiting share of cross-block neighbours, q / (p + q)."""
        if self.p + self.q == 0:
            raise InvalidArgument("beta is undefined when p + q = 0")
        return self.q / (self.p + self.q)

    @property
    def labels(self) -> Tuple[BlockLabel, ...]:
        return (BlockLabel.left,) * self.n + (BlockLabel.right,) * self.n

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "p": self.p,
            "q": self.q,
            "normalization": str(self.normalization),
            "a": self.a,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, data: dict) -> SbmConfig:
        return cls(
            n=int(data["n"]),
            p=float(data["p"]),
            q=float(data["q"]),
            normalization=Normalization.get_from_name(str(data.get("normalization", "row-normalized"))),
            a=float(data.get("a", 1.0)),
            seed=int(data.get("seed", 0)),
        )


def sbm_adjacency(cfg: SbmConfig, rng: np.random.Generator) -> np.ndarray:
    """Symmetric 0/1 adjacency with independent Bernoulli edges above the diagonal."""
    membership = np.repeat(np.eye(2), cfg.n, axis=0)
    probabilities = membership @ np.array([[cfg.p, cfg.q], [cfg.q, cfg.p]]) @ membership.T
    draws = rng.random((2 * cfg.n, 2 * cfg.n)) < probabilities
    upper = np.triu(draws, k=1)
    return (upper | upper.T).astype(np.float64)


def generate_sbm(cfg: SbmConfig, trial: int = 0, rng: Optional[Random] = None) -> InfluenceGraph:
    """
    Draw one graph. The first n agents are labeled L, the last n R.

    Without an explicit generator the graph stream of ``(cfg.seed, trial)``
    is used, so a given config and trial always yield the same graph.
    """
    if rng is None:
        rng = TrialSeed(cfg.seed, trial, Stream.graph).generator()
    adjacency = sbm_adjacency(cfg, rng)
    return InfluenceGraph.from_adjacency(adjacency, normalization=cfg.normalization, a=cfg.a, labels=cfg.labels)


@dataclass(frozen=True)
class ConcentrationCheck:
    """
    Membership of a realized graph in the concentration set.

    Degree bands are (1 +- delta) p n and (1 +- delta) q n, with n agents per
    block. Same-block degrees are really Binomial(n - 1, p), so the bands
    sit O(1/n) off the expected same-block degree.
    """

    delta: float
    in_set: bool
    worst_same_deviation: float
    worst_cross_deviation: float

    def to_json(self) -> dict:
        return {
            "delta": self.delta,
            "in_set": self.in_set,
            "worst_same_deviation": self.worst_same_deviation,
            "worst_cross_deviation": self.worst_cross_deviation,
        }


def _relative_deviation(degrees: np.ndarray, expected: float) -> float:
    if expected == 0:
        return 0.0 if not degrees.any() else math.inf
    return float(np.max(np.abs(degrees - expected)) / expected)


def concentration_check(graph: InfluenceGraph, cfg: SbmConfig, delta: float) -> ConcentrationCheck:
    _delta(delta)
    same, cross = graph.block_degrees()
    same_expected = cfg.p * cfg.n
    cross_expected = cfg.q * cfg.n
    in_set = bool(
        np.all((same >= (1 - delta) * same_expected) & (same <= (1 + delta) * same_expected))
        and np.all((cross >= (1 - delta) * cross_expected) & (cross <= (1 + delta) * cross_expected))
    )
    return ConcentrationCheck(
        delta=delta,
        in_set=in_set,
        worst_same_deviation=_relative_deviation(same, same_expected),
        worst_cross_deviation=_relative_deviation(cross, cross_expected),
    )


def concentration_bound(n: int, rate: float, delta: float) -> float:
    """Per-agent tail bound 3 exp(-delta^2 rate n / 8). May exceed 1."""
    _delta(delta)
    return 3.0 * math.exp(-delta * delta * rate * n / 8.0)


def concentration_bound_union(n: int, p: float, q: float, delta: float) -> float:
    """Union bound over all 2n agents and both degree types, capped at 1."""
    _delta(delta)
    return min(1.0, 6.0 * n * math.exp(-delta * delta * min(p, q) * n / 8.0))


def mean_field_prediction(
    a: float,
    b: float,
    p: float,
    q: float,
    xL: float,
    xR: float,
    normalization: Normalization = Normalization.row_normalized,
    n: Optional[int] = None,
) -> ClassificationResult:
    """
    Classify the two-agent system that a large two-block network behaves like.

    Row-normalized graphs couple the blocks with a * q / (p + q); unit-weight
    graphs with a * n * q, which needs the block size ``n``.
    """
    if p + q <= 0:
        raise InvalidArgument("mean-field prediction needs p + q > 0")
    if normalization is Normalization.unit_weight:
        if n is None:
            raise InvalidArgument("unit-weight predictions need the block size n")
        coupling = a * n * q
    else:
        coupling = a * q / (p + q)
    return classify(TwoAgentSystem(a=coupling, b=b, x0=(xL, xR)))


@dataclass(frozen=True)
class EnvelopeState:
    xbar_L: float
    xunder_L: float
    xbar_R: float
    xunder_R: float


@dataclass(frozen=True, eq=False)
class EnvelopeTrajectory:
    """
    Upper and lower envelopes of each block's opinions on a time grid.

    ``regime_held`` records whether the blocks stayed separated (the upper
    envelope of the lower block below the lower envelope of the upper block)
    for the whole run; the envelopes only bound the agents while it holds.
    """

    times: np.ndarray
    upper_L: np.ndarray
    lower_L: np.ndarray
    upper_R: np.ndarray
    lower_R: np.ndarray
    regime_held: bool

    def __len__(self):
        return self.times.shape[0]

    def __getitem__(self, index: int) -> EnvelopeState:
        return EnvelopeState(
            xbar_L=float(self.upper_L[index]),
            xunder_L=float(self.lower_L[index]),
            xbar_R=float(self.upper_R[index]),
            xunder_R=float(self.lower_R[index]),
        )

    @property
    def ordered(self) -> bool:
        return bool(np.all(self.lower_L <= self.upper_L + 1e-12) and np.all(self.lower_R <= self.upper_R + 1e-12))

    def gap_L(self) -> np.ndarray:
        return self.upper_L - self.lower_L


def _envelope_field(a: float, b: float, p: float, q: float, delta: float, epsilon: float):
    shrink = a * (1 - delta) * q / ((1 + delta) * (p + q))
    grow = a * (1 + delta) * q / ((1 - delta) * (p + q))
    # state order: upper_L, lower_L, upper_R, lower_R with L the positive block
    coupling = np.array(
        [
            [-shrink, 0.0, shrink, 0.0],
            [0.0, -grow, 0.0, grow],
            [grow, 0.0, -grow, 0.0],
            [0.0, shrink, 0.0, -shrink],
        ]
    )
    # make_field computes -L x, so hand it the negated coupling
    return make_field(-coupling, np.full(4, b), epsilon)


def integrate_envelopes(
    a: float,
    b: float,
    p: float,
    q: float,
    delta: float,
    xL: float,
    xR: float,
    epsilon: float = DEFAULT_EPSILON,
    horizon: float = 50.0,
    step: float = DEFAULT_STEP,
    *,
    sample_every: Optional[float] = None,
) -> EnvelopeTrajectory:
    """
    RK4 integration of the four envelope equations.

    Starts from upper = lower = the block's initial opinion. One block must
    start positive and the other negative; when L starts negative the system
    is solved for the reflected opinions and reflected back.
    """
    _delta(delta, allow_zero=True)
    if p + q <= 0:
        raise InvalidArgument("envelope coefficients need p + q > 0")
    if not xL * xR < 0:
        raise InvalidArgument("envelopes need block opinions of opposite signs")
    if not (a > 0 and b >= 0):
        raise InvalidArgument("a must be positive and b non-negative")
    mirrored = xL < 0
    sign = -1.0 if mirrored else 1.0
    x0 = sign * np.array([xL, xL, xR, xR], dtype=np.float64)
    platform = PlatformParams.uniform(b, epsilon=epsilon)
    h = step_guard(step, platform, horizon=horizon)
    every = 1 if sample_every is None else max(1, int(round(sample_every / h)))
    n_steps = math.ceil(horizon / (h * every) - 1e-9) * every
    field_ = _envelope_field(a, b, p, q, delta, epsilon)
    box = max(abs(xL), abs(xR), 1.0)
    times, states, _ = run_rk4(field_, x0, 0.0, n_steps, h, every, box)
    upper_L, lower_L, upper_R, lower_R = states.T
    # positive block lower envelope stays above negative block upper envelope
    regime_held = bool(np.all(upper_R < lower_L))
    if mirrored:
        upper_L, lower_L, upper_R, lower_R = -lower_L, -upper_L, -lower_R, -upper_R
    if not regime_held:
        log.warning("Envelope blocks met before t=%r, the bounds do not apply.", float(times[-1]))
    return EnvelopeTrajectory(
        times=times,
        upper_L=upper_L,
        lower_L=lower_L,
        upper_R=upper_R,
        lower_R=lower_R,
        regime_held=regime_held,
    )


@dataclass(frozen=True)
class EnvelopeCheck:
    contained: bool
    worst_violation: float
    worst_time: Optional[float] = None


def envelope_contains(
    trajectory: Trajectory, envelopes: EnvelopeTrajectory, graph: InfluenceGraph, slack: float = 1e-6
) -> EnvelopeCheck:
    """
    Whether every agent's opinion lies inside its block envelope at every
    sampled time of ``trajectory``. Envelopes are interpolated onto those times.
    """
    if not graph.has_blocks:
        raise InvalidArgument("envelope checks need every agent labeled L or R")
    worst = 0.0
    worst_time = None
    for label, upper, lower in (
        (BlockLabel.left, envelopes.upper_L, envelopes.lower_L),
        (BlockLabel.right, envelopes.upper_R, envelopes.lower_R),
    ):
        index = graph.block_indices(label)
        hi = np.interp(trajectory.times, envelopes.times, upper)
        lo = np.interp(trajectory.times, envelopes.times, lower)
        opinions = trajectory.states[:, index]
        excess = np.maximum(opinions - hi[:, None], lo[:, None] - opinions).max(axis=1)
        k = int(np.argmax(excess))
        if excess[k] > worst:
            worst, worst_time = float(excess[k]), float(trajectory.times[k])
    return EnvelopeCheck(contained=worst <= slack, worst_violation=worst, worst_time=worst_time)


def block_means(state: OpinionState, graph: InfluenceGraph) -> Tuple[float, float]:
    """(mean over L, mean over R)."""
    if not graph.has_blocks:
        raise InvalidArgument("block means need every agent labeled L or R")
    left = state.opinions[graph.block_indices(BlockLabel.left)]
    right = state.opinions[graph.block_indices(BlockLabel.right)]
    return float(left.mean()), float(right.mean())


def _content_lines(path: Path):
    with path.open() as f:
        for number, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if line:
                yield number, line.split()


def _read_labels(path: Path) -> Dict[int, BlockLabel]:
    labels: Dict[int, BlockLabel] = {}
    for number, fields in _content_lines(path):
        if len(fields) != 2:
            raise GraphParseError(path, number, f"expected 'node_id L|R', got {' '.join(fields)!r}")
        try:
            node = int(fields[0])
        except ValueError:
            raise GraphParseError(path, number, f"node id {fields[0]!r} is not an integer")
        if fields[1] not in (BlockLabel.left.value, BlockLabel.right.value):
            raise GraphParseError(path, number, f"unknown label {fields[1]!r}, use L or R")
        if node in labels and labels[node] is not BlockLabel(fields[1]):
            raise GraphParseError(path, number, f"node {node} labeled twice with different labels")
        labels[node] = BlockLabel(fields[1])
    return labels


def load_labeled_graph(
    edges: PathLike,
    labels: PathLike,
    normalization: Normalization = Normalization.row_normalized,
    a: float = 1.0,
) -> InfluenceGraph:
    """
    Read a whitespace edge list and a ``node_id L|R`` labels file.

    Edges are treated as undirected and duplicates collapse. Every labeled
    node is kept, isolated or not, in increasing id order. ``#`` starts a comment.
    """
    edges_path, labels_path = Path(edges), Path(labels)
    node_labels = _read_labels(labels_path)
    graph = nx.Graph()
    graph.add_nodes_from(sorted(node_labels))
    for number, fields in _content_lines(edges_path):
        if len(fields) < 2:
            raise GraphParseError(edges_path, number, f"expected two node ids, got {' '.join(fields)!r}")
        try:
            u, v = int(fields[0]), int(fields[1])
        except ValueError:
            raise GraphParseError(edges_path, number, f"node ids must be integers, got {fields[0]!r} {fields[1]!r}")
        if u == v:
            raise GraphParseError(edges_path, number, f"self-loop on node {u}")
        for node in (u, v):
            if node not in node_labels:
                raise GraphParseError(edges_path, number, f"node {node} has no label in {labels_path}")
        graph.add_edge(u, v)
    nodes = sorted(graph.nodes)
    adjacency = nx.to_numpy_array(graph, nodelist=nodes, dtype=np.float64, weight=None)
    log.info("Loaded %d nodes and %d edges from %s", graph.number_of_nodes(), graph.number_of_edges(), edges_path)
    return InfluenceGraph.from_adjacency(
        adjacency, normalization=normalization, a=a, labels=[node_labels[i] for i in nodes]
    )


def write_labeled_graph(
    graph: InfluenceGraph,
    edges_path: PathLike,
    labels_path: PathLike,
    node_ids: Optional[Sequence[int]] = None,
) -> Tuple[Path, Path]:
    """Write ``graph`` in the edge-list and labels formats read by :func:`load_labeled_graph`."""
    ids: List[int] = list(range(graph.n)) if node_ids is None else [int(i) for i in node_ids]
    if len(ids) != graph.n:
        raise InvalidArgument(f"got {len(ids)} node ids for {graph.n} agents")
    exported = nx.Graph()
    exported.add_nodes_from(ids)
    exported.add_edges_from((ids[i], ids[j]) for i, j in graph.edges())
    edges_path, labels_path = Path(edges_path), Path(labels_path)
    nx.write_edgelist(exported, edges_path, data=False)
    with labels_path.open("w") as f:
        for node, label in zip(ids, graph.labels):
            f.write(f"{node} {label}\n")
    log.info("Wrote %d edges to %s", exported.number_of_edges(), edges_path)
    return edges_path, labels_path
