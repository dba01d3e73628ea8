from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np

from .constants import BOUNDARY_RTOL, DEFAULT_EPSILON, ClassificationKind
from .dynamics import OpinionState, PlatformParams, Trajectory
from .equilibrium import EquilibriumReport
from .errors import InvalidArgument
from .graph import InfluenceGraph
from .simulation import SimulationSettings, integrate_ensemble, simulate

log = logging.getLogger("echochamber")

__all__ = [
    "TwoAgentSystem",
    "ClassificationResult",
    "QuadrantTrajectory",
    "TrajectoryExtrema",
    "BandCrossing",
    "RegionGrid",
    "classify",
    "pd_equilibrium",
    "closed_form_trajectory",
    "trajectory_extrema",
    "polarization_curve",
    "band_crossing",
    "region_grid",
    "write_region_csv",
    "consensus_possible",
    "simulate_two_agent",
    "simulate_region",
]


def _positive(name: str, value: float):
    if not (math.isfinite(value) and value > 0):
        raise InvalidArgument(f"{name} must be positive, got {value!r}")


@dataclass(frozen=True)
class TwoAgentSystem:
    """Two agents with mutual influence a, platform strength b and initial opinions x0."""

    a: float
    b: float
    x0: Tuple[float, float]
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        _positive("a", self.a)
        _positive("b", self.b)
        _positive("epsilon", self.epsilon)
        x0 = tuple(float(i) for i in self.x0)
        if len(x0) != 2 or not all(math.isfinite(i) for i in x0):
            raise InvalidArgument(f"x0 must be two finite opinions, got {self.x0!r}")
        object.__setattr__(self, "x0", x0)

    @property
    def x1(self) -> float:
        return self.x0[0]

    @property
    def x2(self) -> float:
        return self.x0[1]

    @property
    def ratio(self) -> float:
        return self.b / self.a

    @property
    def opposite_signs(self) -> bool:
        return self.x1 * self.x2 < 0

    def graph(self) -> InfluenceGraph:
        return InfluenceGraph.pair(self.a)

    def platform(self) -> PlatformParams:
        return PlatformParams.uniform(self.b, epsilon=self.epsilon)

    def initial_state(self) -> OpinionState:
        return OpinionState(np.array(self.x0))

    def quadrant(self) -> QuadrantTrajectory:
        """The closed-form description of this system while it stays in its opening quadrant."""
        if not self.opposite_signs:
            raise InvalidArgument("the quadrant solution needs initial opinions of opposite signs")
        if self.x1 < 0:
            return QuadrantTrajectory(u=-self.x1, v=self.x2, a=self.a, b=self.b)
        return QuadrantTrajectory(u=self.x1, v=-self.x2, a=self.a, b=self.b, mirrored=True)


@dataclass(frozen=True)
class ClassificationResult:
    """
    Outcome of the PD/CO test.

    ``conditions`` holds the two sides of each inequality that was evaluated.
    ``sign_source`` says where the predicted consensus sign comes from.
    """

    kind: ClassificationKind
    predicted_equilibrium: Optional[Tuple[float, float]]
    conditions: Dict[str, Optional[float]] = field(default_factory=dict)
    sign_source: str = "quadrant"
    polarization: Optional[float] = None

    def to_json(self) -> dict:
        return {
            "kind": str(self.kind),
            "predicted_equilibrium": None if self.predicted_equilibrium is None else list(self.predicted_equilibrium),
            "conditions": dict(self.conditions),
            "sign_source": self.sign_source,
            "polarization": self.polarization,
        }


def pd_equilibrium(a: float, b: float) -> Tuple[float, float]:
    """(mu*, p*) = (b/(2a+b), 2b/(2a+b))."""
    _positive("a", a)
    _positive("b", b)
    mu = b / (2.0 * a + b)
    return mu, 2.0 * mu


def consensus_possible(a: float, b: float, bound: float = 1.0) -> bool:
    """
    Whether band-crossing consensus can happen for opinions inside [-bound, bound].

    The sandwich between the two PD conditions is non-empty only if
    |x1 + x2| > b/a, which needs b < a * bound.
    """
    _positive("a", a)
    _positive("b", b)
    return b < a * bound


def _near(lhs: float, rhs: float) -> bool:
    return abs(lhs - rhs) <= BOUNDARY_RTOL * max(abs(lhs), abs(rhs))


def _log_c2_rhs(a: float, b: float, imbalance: float) -> float:
    """log of b^(1-2a/b) a^(2a/b) imbalance^(1+2a/b); -inf when imbalance is 0."""
    if imbalance == 0:
        return -math.inf
    r = 2.0 * a / b
    return (1.0 - r) * math.log(b) + r * math.log(a) + (1.0 + r) * math.log(imbalance)


def classify(system: TwoAgentSystem) -> ClassificationResult:
    """
    Decide which equilibrium the two-agent system reaches.

    Same-sign opinions reach consensus at their common sign. Opposite signs
    reach persistent disagreement when

        C1: (2a+b)|x1-x2| - 2b < b|x1+x2|
        C2: (2a+b)|x1-x2| - 2b > b^(1-2a/b) a^(2a/b) |x1+x2|^(1+2a/b)

    and consensus otherwise. A decision that rests on an equality within
    relative 1e-12 is reported as Boundary.
    """
    x1, x2 = system.x0
    if x1 * x2 == 0:
        raise InvalidArgument("classification needs both initial opinions non-zero")
    a, b = system.a, system.b
    mu, polarization = pd_equilibrium(a, b)
    if x1 * x2 > 0:
        sign = 1.0 if x1 > 0 else -1.0
        return ClassificationResult(
            kind=ClassificationKind.co_same_sign,
            predicted_equilibrium=(sign, sign),
            conditions={},
        )

    spread = abs(x1 - x2)
    imbalance = abs(x1 + x2)
    lhs = (2.0 * a + b) * spread - 2.0 * b
    c1_rhs = b * imbalance
    log_c2_rhs = _log_c2_rhs(a, b, imbalance)
    c2_rhs = math.exp(log_c2_rhs) if log_c2_rhs < 709.0 else math.inf
    conditions = {"lhs": lhs, "c1_rhs": c1_rhs, "c2_rhs": c2_rhs, "log_c2_rhs": log_c2_rhs}

    c1 = lhs < c1_rhs
    near_c1 = _near(lhs, c1_rhs)
    if lhs > 0:
        c2 = math.log(lhs) > log_c2_rhs
        # a balanced start has c2_rhs = 0, so any positive lhs clears C2 outright
        near_c2 = math.isfinite(log_c2_rhs) and abs(math.log(lhs) - log_c2_rhs) <= BOUNDARY_RTOL * max(
            1.0, abs(log_c2_rhs)
        )
    else:
        c2 = False
        near_c2 = lhs == 0 and imbalance == 0

    pd_sign = (-mu, mu) if x1 < 0 else (mu, -mu)
    if c1 and not near_c1:
        return ClassificationResult(ClassificationKind.pd_c1, pd_sign, conditions, polarization=polarization)
    if c2 and not near_c2:
        return ClassificationResult(ClassificationKind.pd_c2, pd_sign, conditions, polarization=polarization)
    if near_c1 or near_c2:
        return ClassificationResult(ClassificationKind.boundary, None, conditions, sign_source="none")
    # consensus on the side of the agent that crosses its axis first
    extrema = trajectory_extrema(a, b, *system.quadrant().uv)
    crosses_x1 = extrema.max_x1 > 0
    sign = 1.0 if crosses_x1 else -1.0
    if x1 > 0:
        sign = -sign
    return ClassificationResult(
        kind=ClassificationKind.co_band,
        predicted_equilibrium=(sign, sign),
        conditions=conditions,
        sign_source="extrema",
    )


@dataclass(frozen=True)
class QuadrantTrajectory:
    """
    Closed-form solution in the (-,+) quadrant with x1(0) = -u, x2(0) = v.

    Valid for the sgn_eps dynamics only while x1 < -epsilon and x2 > epsilon.
    A mirrored trajectory describes x1(0) = u > 0 > x2(0) = -v by negation.
    """

    u: float
    v: float
    a: float
    b: float
    mirrored: bool = False

    def __post_init__(self):
        _positive("u", self.u)
        _positive("v", self.v)
        _positive("a", self.a)
        _positive("b", self.b)

    @property
    def uv(self) -> Tuple[float, float]:
        return self.u, self.v

    @property
    def excess(self) -> float:
        """(2a+b)(u+v) - 2b, the coefficient driving the fast mode."""
        return (2.0 * self.a + self.b) * (self.u + self.v) - 2.0 * self.b

    def at(self, t: Union[float, np.ndarray]) -> Tuple[Union[float, np.ndarray], Union[float, np.ndarray]]:
        a, b, u, v = self.a, self.b, self.u, self.v
        t = np.asarray(t, dtype=np.float64)
        if (t < 0).any():
            raise InvalidArgument("closed-form trajectories are defined for t >= 0")
        mu = b / (2.0 * a + b)
        slow = np.exp(-b * t) * (u - v) / 2.0
        fast = np.exp(-(2.0 * a + b) * t) * self.excess / (2.0 * (2.0 * a + b))
        x1 = -mu - slow - fast
        x2 = mu - slow + fast
        if self.mirrored:
            x1, x2 = -x1, -x2
        if t.ndim == 0:
            return float(x1), float(x2)
        return x1, x2


def closed_form_trajectory(q: QuadrantTrajectory, t: Union[float, np.ndarray]):
    return q.at(t)


@dataclass(frozen=True)
class TrajectoryExtrema:
    max_x1: float
    min_x2: float
    t_star_x1: Optional[float]
    t_star_x2: Optional[float]
    case: str

    @property
    def stays_in_quadrant(self) -> bool:
        return self.max_x1 < 0 < self.min_x2

    def to_json(self) -> dict:
        return {
            "max_x1": self.max_x1,
            "min_x2": self.min_x2,
            "t_star_x1": self.t_star_x1,
            "t_star_x2": self.t_star_x2,
            "case": self.case,
        }


def _extrema_case(excess: float, gap: float, b: float) -> str:
    if excess == 0 or gap == 0:
        return "degenerate"
    if excess < 0:
        return "1" if gap < 0 else "2"
    if gap < 0:
        return "3.1" if excess < b * -gap else "3.2"
    return "4.1" if excess < b * gap else "4.2"


def trajectory_extrema(a: float, b: float, u: float, v: float) -> TrajectoryExtrema:
    """
    sup over t >= 0 of x1(t) and inf of x2(t) for the quadrant solution.

    Both coordinates share the critical time t* = log(|excess| / (b|u-v|)) / 2a;
    it is a critical point of x1 when excess and u-v have opposite signs and of
    x2 when they agree. Only positive critical times count; t = 0 and the
    limit t -> inf are always candidates.
    """
    q = QuadrantTrajectory(u=u, v=v, a=a, b=b)
    excess = q.excess
    gap = u - v
    mu = b / (2.0 * a + b)
    t_star = None
    if excess != 0 and gap != 0:
        t_star = math.log(abs(excess) / (b * abs(gap))) / (2.0 * a)
        if t_star <= 0:
            t_star = None
    t_star_x1 = t_star if t_star is not None and excess * gap < 0 else None
    t_star_x2 = t_star if t_star is not None and excess * gap > 0 else None

    x1_candidates = [-u, -mu]
    x2_candidates = [v, mu]
    if t_star_x1 is not None:
        x1_candidates.append(q.at(t_star_x1)[0])
    if t_star_x2 is not None:
        x2_candidates.append(q.at(t_star_x2)[1])
    return TrajectoryExtrema(
        max_x1=max(x1_candidates),
        min_x2=min(x2_candidates),
        t_star_x1=t_star_x1,
        t_star_x2=t_star_x2,
        case=_extrema_case(excess, gap, b),
    )


def polarization_curve(a: float, b: float, y0: float, t: Union[float, np.ndarray]):
    """
    y(t) = 2b/(2a+b) + e^{-(2a+b)t} (y0 - 2b/(2a+b)).

    Only describes the polarization of a system classified PD.
    """
    target = 2.0 * b / (2.0 * a + b)
    value = target + np.exp(-(2.0 * a + b) * np.asarray(t, dtype=np.float64)) * (y0 - target)
    return float(value) if np.ndim(value) == 0 else value


@dataclass(frozen=True, eq=False)
class BandCrossing:
    """
    Solution of the two-agent system (a = 1) while x1 is inside the epsilon band.

    x(t) = c_plus e^{lambda_plus t} v_plus + c_minus e^{lambda_minus t} v_minus + v0,
    started from x1(0) = -epsilon.
    """

    b: float
    epsilon: float
    x2_0: float
    lambda_plus: float
    lambda_minus: float
    v_plus: np.ndarray
    v_minus: np.ndarray
    v0: np.ndarray
    c_plus: float
    c_minus: float
    c_minus_floor: float

    @property
    def matrix(self) -> np.ndarray:
        b, eps = self.b, self.epsilon
        return np.array([[b / eps - b - 1.0, 1.0], [1.0, -b - 1.0]])

    @property
    def forcing(self) -> np.ndarray:
        return np.array([0.0, self.b])

    @property
    def crossing_guaranteed(self) -> bool:
        return self.c_plus > 0 and self.c_minus > 0

    def at(self, t: float) -> np.ndarray:
        return (
            self.c_plus * math.exp(self.lambda_plus * t) * self.v_plus
            + self.c_minus * math.exp(self.lambda_minus * t) * self.v_minus
            + self.v0
        )

    def derivative(self, t: float) -> np.ndarray:
        return self.c_plus * self.lambda_plus * math.exp(self.lambda_plus * t) * self.v_plus + (
            self.c_minus * self.lambda_minus * math.exp(self.lambda_minus * t) * self.v_minus
        )

    def residual(self, t: float) -> float:
        """Sup-norm of x'(t) - (M x(t) + f), relative to the size of x'(t)."""
        x = self.at(t)
        error = self.derivative(t) - (self.matrix @ x + self.forcing)
        return float(np.max(np.abs(error)) / max(1.0, float(np.max(np.abs(self.derivative(t))))))

    def to_json(self) -> dict:
        return {
            "b": self.b,
            "epsilon": self.epsilon,
            "x2_0": self.x2_0,
            "lambda_plus": self.lambda_plus,
            "lambda_minus": self.lambda_minus,
            "v_plus": self.v_plus.tolist(),
            "v_minus": self.v_minus.tolist(),
            "v0": self.v0.tolist(),
            "c_plus": self.c_plus,
            "c_minus": self.c_minus,
            "c_minus_floor": self.c_minus_floor,
            "crossing_guaranteed": self.crossing_guaranteed,
        }


def _band_coefficients(v_plus: np.ndarray, v_minus: np.ndarray, v0: np.ndarray, eps: float, x2_0: float):
    system = np.array([[v_plus[0], v_minus[0]], [1.0, 1.0]])
    target = np.array([-eps - v0[0], x2_0 - v0[1]])
    return np.linalg.solve(system, target)


def band_crossing(b: float, epsilon: float, x2_0: float) -> BandCrossing:
    """
    Eigen-analysis of the band system with a normalized to 1.

    Entry condition x2(0) >= b. Positivity of both coefficients guarantees
    that x1 leaves the band upward while x2 stays above epsilon; failures
    are reported through ``crossing_guaranteed``.
    """
    _positive("b", b)
    _positive("epsilon", epsilon)
    if not x2_0 >= b:
        raise InvalidArgument(f"band crossing needs x2(0) >= b, got x2(0)={x2_0!r} b={b!r}")
    root = math.sqrt(b * b + 4.0 * epsilon * epsilon)
    lambda_plus = (b - 2.0 * epsilon - 2.0 * b * epsilon + root) / (2.0 * epsilon)
    lambda_minus = (b - 2.0 * epsilon - 2.0 * b * epsilon - root) / (2.0 * epsilon)
    v_plus = np.array([(b + root) / (2.0 * epsilon), 1.0])
    v_minus = np.array([(b - root) / (2.0 * epsilon), 1.0])
    denominator = b + 1.0 - b * epsilon - 2.0 * epsilon
    v0 = np.array([-epsilon, b - epsilon - b * epsilon]) / denominator
    c_plus, c_minus = _band_coefficients(v_plus, v_minus, v0, epsilon, x2_0)
    _, floor = _band_coefficients(v_plus, v_minus, v0, epsilon, b)
    result = BandCrossing(
        b=b,
        epsilon=epsilon,
        x2_0=x2_0,
        lambda_plus=lambda_plus,
        lambda_minus=lambda_minus,
        v_plus=v_plus,
        v_minus=v_minus,
        v0=v0,
        c_plus=float(c_plus),
        c_minus=float(c_minus),
        c_minus_floor=float(floor),
    )
    if not result.crossing_guaranteed:
        log.info("epsilon=%r is too large to guarantee the band crossing at b=%r.", epsilon, b)
    return result


@dataclass(frozen=True, eq=False)
class RegionGrid:
    """Classification of every lattice point (x1(0), x2(0)); kinds[i, j] is at (values[i], values[j])."""

    a: float
    b: float
    values: np.ndarray
    kinds: np.ndarray

    @property
    def resolution(self) -> int:
        return self.values.shape[0]

    def points(self):
        for i, x1 in enumerate(self.values.tolist()):
            for j, x2 in enumerate(self.values.tolist()):
                yield x1, x2, self.kinds[i, j]

    def counts(self) -> Dict[ClassificationKind, int]:
        return {kind: int((self.kinds == kind).sum()) for kind in ClassificationKind}


def region_grid(a: float, b: float, grid_min: float, grid_max: float, resolution: int) -> RegionGrid:
    """Classify the square lattice [grid_min, grid_max]^2; points on an axis are Boundary."""
    _positive("a", a)
    _positive("b", b)
    if resolution < 2:
        raise InvalidArgument(f"resolution must be at least 2, got {resolution!r}")
    if not grid_max > grid_min:
        raise InvalidArgument("grid_max must exceed grid_min")
    values = np.linspace(grid_min, grid_max, resolution)
    kinds = np.empty((resolution, resolution), dtype=object)
    for i, x1 in enumerate(values.tolist()):
        for j, x2 in enumerate(values.tolist()):
            if x1 == 0 or x2 == 0:
                kinds[i, j] = ClassificationKind.boundary
                continue
            kinds[i, j] = classify(TwoAgentSystem(a=a, b=b, x0=(x1, x2))).kind
    return RegionGrid(a=a, b=b, values=values, kinds=kinds)


def write_region_csv(grid: RegionGrid, path: Union[str, Path]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=["x1_0", "x2_0", "kind"], lineterminator="\n")
        writer.writeheader()
        for x1, x2, kind in grid.points():
            writer.writerow({"x1_0": repr(x1), "x2_0": repr(x2), "kind": str(kind)})
    log.info("Wrote %d region points to %s", grid.resolution**2, path)
    return path


def simulate_two_agent(
    system: TwoAgentSystem, settings: SimulationSettings = SimulationSettings()
) -> Tuple[Trajectory, EquilibriumReport]:
    return simulate(system.initial_state(), system.graph(), system.platform(), settings)


def simulate_region(
    grid: RegionGrid, epsilon: float = DEFAULT_EPSILON, settings: SimulationSettings = SimulationSettings()
) -> np.ndarray:
    """
    Simulated equilibrium kind of every lattice point, as an object array
    shaped like ``grid.kinds``. Axis points are simulated too.
    """
    values = grid.values
    x1, x2 = np.meshgrid(values, values, indexing="ij")
    x0s = np.stack([x1.ravel(), x2.ravel()], axis=1)
    pair = InfluenceGraph.pair(grid.a)
    result = integrate_ensemble(x0s, pair.laplacian, grid.b, epsilon, settings=settings)
    return np.array(result.kinds, dtype=object).reshape(grid.kinds.shape)
