from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .constants import CONSENSUS_TOL_FACTOR, DEFAULT_TOL, DEFAULT_WINDOW, BlockLabel, EquilibriumKind
from .dynamics import OpinionState, PlatformParams, Trajectory, _sgn_eps, vector_field
from .errors import InvalidArgument, PreconditionViolation
from .graph import InfluenceGraph

log = logging.getLogger("echochamber")

__all__ = [
    "EquilibriumReport",
    "detect_equilibrium",
    "classify_limit",
    "polarization_of",
    "equilibrium_residual",
    "lyapunov_value",
    "lyapunov_dissipation",
]


@dataclass(frozen=True)
class EquilibriumReport:
    kind: EquilibriumKind
    limit: Optional[OpinionState] = None
    polarization: Optional[float] = None
    settle_time: Optional[float] = None
    residual: Optional[float] = None
    movement: Optional[float] = None

    @property
    def converged(self) -> bool:
        return self.kind.converged

    def to_json(self) -> dict:
        return {
            "kind": str(self.kind),
            "limit": None if self.limit is None else self.limit.opinions.tolist(),
            "polarization": self.polarization,
            "settle_time": self.settle_time,
            "residual": self.residual,
            "movement": self.movement,
        }


def polarization_of(opinions: np.ndarray, graph: InfluenceGraph) -> Optional[float]:
    """mean over R minus mean over L; x2 - x1 for an unlabeled pair, otherwise None."""
    if graph.has_blocks:
        left = opinions[..., graph.block_indices(BlockLabel.left)]
        right = opinions[..., graph.block_indices(BlockLabel.right)]
        return right.mean(axis=-1) - left.mean(axis=-1)
    if graph.n == 2:
        return opinions[..., 1] - opinions[..., 0]
    return None


def classify_limit(opinions: np.ndarray, tol: float, alpha: float = 1.0) -> EquilibriumKind:
    """Kind of a converged state: consensus at the outlet opinion or persistent disagreement."""
    target = alpha if alpha > 0 else 1.0
    band = CONSENSUS_TOL_FACTOR * tol
    if np.all(np.abs(opinions - target) < band):
        return EquilibriumKind.consensus_plus
    if np.all(np.abs(opinions + target) < band):
        return EquilibriumKind.consensus_minus
    return EquilibriumKind.persistent_disagreement


def equilibrium_residual(state: OpinionState, graph: InfluenceGraph, platform: PlatformParams) -> float:
    """||(L+B)x - alpha B sgn_eps(x)||_inf, zero exactly on the equilibrium set."""
    return float(np.max(np.abs(vector_field(state, graph, platform)), initial=0.0))


def detect_equilibrium(
    traj: Trajectory,
    graph: InfluenceGraph,
    platform: PlatformParams,
    tol: float = DEFAULT_TOL,
    window: float = DEFAULT_WINDOW,
) -> EquilibriumReport:
    """
    Judge whether a trajectory has settled.

    The trajectory has converged when the sup-norm of the vector field at
    its final state is below ``tol`` and no recorded state of the trailing
    ``window`` is further than ``tol * window`` from the final state.
    Trajectories that do not cover a full window are Undetermined.
    """
    if not len(traj):
        raise InvalidArgument("cannot detect an equilibrium on an empty trajectory")
    if not (tol > 0 and window > 0):
        raise InvalidArgument(f"tol and window must be positive, got tol={tol!r} window={window!r}")
    final = traj.final
    residual = equilibrium_residual(final, graph, platform)
    start = final.time - window
    if traj.times[0] > start + 1e-9 or len(traj) < 2:
        return EquilibriumReport(kind=EquilibriumKind.undetermined, residual=residual)

    tail = traj.states[traj.times >= start - 1e-9]
    movement = float(np.max(np.abs(tail - final.opinions)))
    if residual >= tol or movement >= tol * window:
        log.debug("No equilibrium at t=%r: residual=%r movement=%r", final.time, residual, movement)
        return EquilibriumReport(
            kind=EquilibriumKind.non_convergent, residual=residual, movement=movement
        )

    distance = np.max(np.abs(traj.states - final.opinions), axis=1)
    # largest distance still to come, seen from each sample
    remaining = np.maximum.accumulate(distance[::-1])[::-1]
    settled = np.nonzero(remaining < CONSENSUS_TOL_FACTOR * tol)[0]
    settle_time = float(traj.times[settled[0]]) if settled.size else final.time
    polarization = polarization_of(final.opinions, graph)
    return EquilibriumReport(
        kind=classify_limit(final.opinions, tol, platform.alpha),
        limit=final,
        polarization=None if polarization is None else float(polarization),
        settle_time=settle_time,
        residual=residual,
        movement=movement,
    )


def _certificate_parts(state: OpinionState, graph: InfluenceGraph, platform: PlatformParams):
    if len(state) != graph.n:
        raise InvalidArgument(f"state has {len(state)} opinions but the graph has {graph.n} agents")
    if not graph.is_symmetric():
        raise PreconditionViolation("the Lyapunov certificate needs symmetric influence weights")
    b = platform.b_vector(graph.n)
    system = graph.laplacian + np.diag(b)
    return state.opinions, b, system


def _sgn_integral(x: np.ndarray, epsilon: float) -> np.ndarray:
    magnitude = np.abs(x)
    return np.where(magnitude <= epsilon, x * x / (2.0 * epsilon), magnitude - epsilon / 2.0)


def lyapunov_value(state: OpinionState, graph: InfluenceGraph, platform: PlatformParams) -> float:
    """
    V(x) = 1/2 x^T (L + B) x - sum_j alpha b_j int_0^{x_j} sgn_eps.

    Only a certificate for symmetric weights; asymmetric graphs raise
    PreconditionViolation.
    """
    x, b, system = _certificate_parts(state, graph, platform)
    quadratic = 0.5 * float(x @ system @ x)
    return quadratic - platform.alpha * float(b @ _sgn_integral(x, platform.epsilon))


def lyapunov_dissipation(state: OpinionState, graph: InfluenceGraph, platform: PlatformParams) -> float:
    """||(L + B)x - alpha B sgn_eps(x)||^2, equal to -dV/dt along the flow."""
    x, b, system = _certificate_parts(state, graph, platform)
    gradient = system @ x - platform.alpha * b * _sgn_eps(x, platform.epsilon)
    return float(gradient @ gradient)
