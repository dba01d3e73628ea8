from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .constants import BOX_SLACK, DEFAULT_EPSILON, DEFAULT_STEP, STEP_GUARD_FACTOR
from .errors import InvalidArgument, NumericalFailure
from .graph import InfluenceGraph

log = logging.getLogger("echochamber")

__all__ = [
    "OpinionState",
    "PlatformParams",
    "Trajectory",
    "sgn_eps",
    "vector_field",
    "rescale_slant",
    "step_guard",
    "integrate",
]

Field = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class OpinionState:
    """Opinions of every agent at one point in time."""

    opinions: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        opinions = np.array(self.opinions, dtype=np.float64, copy=True).reshape(-1)
        opinions.setflags(write=False)
        object.__setattr__(self, "opinions", opinions)
        if not self.time >= 0:
            raise InvalidArgument(f"time must be non-negative, got {self.time!r}")

    def __len__(self):
        return self.opinions.shape[0]

    def __neg__(self) -> OpinionState:
        return OpinionState(-self.opinions, self.time)

    @property
    def box_bound(self) -> float:
        """K = max(max_i |x_i|, 1); [-K, K]^n is positively invariant."""
        return max(float(np.max(np.abs(self.opinions), initial=0.0)), 1.0)


@dataclass(frozen=True, eq=False)
class PlatformParams:
    """
    Platform strength b (one value per agent, or one value shared by all),
    the half-width epsilon of sgn_eps and the average content slant alpha.
    """

    b: np.ndarray
    epsilon: float = DEFAULT_EPSILON
    alpha: float = 1.0

    def __post_init__(self):
        b = np.array(self.b, dtype=np.float64, copy=True).reshape(-1)
        if b.size == 0:
            raise InvalidArgument("platform strength b must not be empty")
        if not np.isfinite(b).all() or (b < 0).any():
            raise InvalidArgument("platform strength b must be finite and non-negative")
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise InvalidArgument(f"epsilon must be positive, got {self.epsilon!r}")
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidArgument(f"alpha must lie in [0, 1], got {self.alpha!r}")
        b.setflags(write=False)
        object.__setattr__(self, "b", b)

    @classmethod
    def uniform(cls, b: float, epsilon: float = DEFAULT_EPSILON, alpha: float = 1.0) -> PlatformParams:
        return cls(b=np.array([b], dtype=np.float64), epsilon=epsilon, alpha=alpha)

    @property
    def b_max(self) -> float:
        return float(self.b.max())

    def b_vector(self, n: int) -> np.ndarray:
        if self.b.shape[0] == 1:
            return np.full(n, self.b[0])
        if self.b.shape[0] != n:
            raise InvalidArgument(f"platform has {self.b.shape[0]} strengths for {n} agents")
        return self.b


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    Recorded states on a uniform time grid.

    ``step_size`` is the spacing of the recorded grid, ``integration_step``
    the RK4 step actually taken (it divides ``step_size``).
    """

    times: np.ndarray
    states: np.ndarray
    step_size: float
    integration_step: float = 0.0
    box_violations: Tuple[float, ...] = field(default=())

    def __post_init__(self):
        times = np.array(self.times, dtype=np.float64, copy=True)
        states = np.array(self.states, dtype=np.float64, copy=True)
        if states.ndim != 2 or states.shape[0] != times.shape[0]:
            raise InvalidArgument("states must be a (len(times), n) array")
        if times.shape[0] > 1 and not (np.diff(times) > 0).all():
            raise InvalidArgument("trajectory times must be strictly increasing")
        times.setflags(write=False)
        states.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)
        if not self.integration_step:
            object.__setattr__(self, "integration_step", self.step_size)

    def __len__(self):
        return self.times.shape[0]

    def __getitem__(self, index: int) -> OpinionState:
        return OpinionState(self.states[index], float(self.times[index]))

    def __iter__(self):
        for index in range(len(self)):
            yield self[index]

    @property
    def final(self) -> OpinionState:
        return self[-1]

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def at(self, t: float) -> OpinionState:
        """Recorded state closest to time t."""
        index = int(np.argmin(np.abs(self.times - t)))
        return self[index]

    def window(self, start: float, stop: float) -> Trajectory:
        mask = (self.times >= start - 1e-12) & (self.times <= stop + 1e-12)
        return replace(self, times=self.times[mask], states=self.states[mask])

    def concat(self, other: Trajectory) -> Trajectory:
        """Join ``other`` onto this trajectory, dropping its duplicated first sample."""
        if len(self) and len(other) and other.times[0] <= self.times[-1]:
            other = replace(other, times=other.times[1:], states=other.states[1:])
        return Trajectory(
            times=np.concatenate([self.times, other.times]),
            states=np.concatenate([self.states, other.states]),
            step_size=self.step_size,
            integration_step=self.integration_step,
            box_violations=self.box_violations + other.box_violations,
        )


def sgn_eps(x: float, epsilon: float) -> float:
    """
    Continuous interpolation of the sign function.

    -1 for x <= -epsilon, x/epsilon inside the band, +1 for x >= epsilon.
    """
    if not math.isfinite(x):
        raise InvalidArgument(f"x must be finite, got {x!r}")
    if not (math.isfinite(epsilon) and epsilon > 0):
        raise InvalidArgument(f"epsilon must be positive, got {epsilon!r}")
    return float(np.clip(x / epsilon, -1.0, 1.0))


def _sgn_eps(x: np.ndarray, epsilon: float) -> np.ndarray:
    return np.clip(x / epsilon, -1.0, 1.0)


def make_field(laplacian: np.ndarray, b: np.ndarray, epsilon: float, alpha: float = 1.0) -> Field:
    """
    The right-hand side -Lx + B(alpha sgn_eps(x) - x) as a closure.

    ``laplacian`` is (n, n) or a stack (m, n, n); ``x`` is (n,) or (m, n).
    Stacked members are evaluated one matrix-vector product each, so a member's
    arithmetic does not depend on which other members share its batch.
    """
    if laplacian.ndim == 3:

        def social(x: np.ndarray) -> np.ndarray:
            return np.matmul(laplacian, x[..., None])[..., 0]

    elif laplacian.ndim == 2:

        def social(x: np.ndarray) -> np.ndarray:
            if x.ndim == 1:
                return laplacian @ x
            return np.matmul(laplacian, x[..., None])[..., 0]

    else:
        raise InvalidArgument(f"laplacian must be 2 or 3 dimensional, got {laplacian.ndim}")

    if alpha == 0.0:

        def field_(x: np.ndarray) -> np.ndarray:
            return -social(x) - b * x

    elif alpha == 1.0:

        def field_(x: np.ndarray) -> np.ndarray:
            return -social(x) + b * (_sgn_eps(x, epsilon) - x)

    else:

        def field_(x: np.ndarray) -> np.ndarray:
            return -social(x) + b * (alpha * _sgn_eps(x, epsilon) - x)

    return field_


def _check_dimensions(n_state: int, graph: InfluenceGraph, platform: PlatformParams) -> np.ndarray:
    if n_state != graph.n:
        raise InvalidArgument(f"state has {n_state} opinions but the graph has {graph.n} agents")
    return platform.b_vector(graph.n)


def vector_field(state: OpinionState, graph: InfluenceGraph, platform: PlatformParams) -> np.ndarray:
    """Component i is sum_j a_ij (x_j - x_i) + b_i (alpha sgn_eps(x_i) - x_i)."""
    b = _check_dimensions(len(state), graph, platform)
    return make_field(graph.laplacian, b, platform.epsilon, platform.alpha)(state.opinions)


def rk4_step(field_: Field, x: np.ndarray, h: float) -> np.ndarray:
    k1 = field_(x)
    k2 = field_(x + 0.5 * h * k1)
    k3 = field_(x + 0.5 * h * k2)
    k4 = field_(x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)


def rescale_slant(platform: PlatformParams) -> Tuple[float, PlatformParams]:
    """
    Map the alpha-slant system onto the alpha = 1 system.

    With x = alpha * y and epsilon = alpha * eps_y the dynamics of y are the
    alpha = 1 dynamics with half-width eps_y. Returns (alpha, platform for y).
    alpha = 0 has no such rescaling and is returned unchanged.
    """
    if platform.alpha in (0.0, 1.0):
        return 1.0, platform
    return platform.alpha, replace(platform, epsilon=platform.epsilon / platform.alpha, alpha=1.0)


def step_guard(
    step: float, platform: PlatformParams, quiet: bool = False, horizon: Optional[float] = None
) -> float:
    """
    Largest accepted step: min(step, epsilon / (10 max b)).

    A refined step is rounded down so that a whole number of steps spans
    ``horizon`` when one is given.
    """
    if not step > 0:
        raise InvalidArgument(f"step must be positive, got {step!r}")
    b_max = platform.b_max * (platform.alpha if platform.alpha < 1.0 else 1.0)
    if b_max <= 0:
        return step
    limit = platform.epsilon / (STEP_GUARD_FACTOR * b_max)
    if step <= limit:
        return step
    accepted = limit
    if horizon is not None and horizon > 0:
        accepted = horizon / math.ceil(horizon / limit - 1e-9)
    if not quiet:
        log.warning(
            "Step %r exceeds epsilon/(%s*b)=%r, refining the integration step to %r.",
            step,
            STEP_GUARD_FACTOR,
            limit,
            accepted,
        )
    return accepted


def _sampling(step: float, sample_every: Optional[float]) -> int:
    if sample_every is None:
        return 1
    if not sample_every > 0:
        raise InvalidArgument(f"sample_every must be positive, got {sample_every!r}")
    return max(1, int(round(sample_every / step)))


def run_rk4(
    field_: Field,
    x0: np.ndarray,
    t0: float,
    n_steps: int,
    step: float,
    every: int,
    box: float,
) -> Tuple[np.ndarray, np.ndarray, List[float]]:
    """
    Advance ``n_steps`` RK4 steps from (t0, x0), recording every ``every`` steps.

    Returns the recorded times, the recorded states (first row is x0) and the
    times at which the state left the invariant box [-box, box].
    """
    n_records = n_steps // every + 1
    times = t0 + step * every * np.arange(n_records, dtype=np.float64)
    states = np.empty((n_records,) + x0.shape, dtype=np.float64)
    states[0] = x0
    violations: List[float] = []
    x = x0
    for k in range(1, n_steps + 1):
        x = rk4_step(field_, x, step)
        if not np.isfinite(x).all():
            raise NumericalFailure(t0 + k * step)
        if np.max(np.abs(x)) > box + BOX_SLACK:
            violations.append(t0 + k * step)
        if k % every == 0:
            states[k // every] = x
    if violations:
        log.warning(
            "Trajectory left the invariant box [-%r, %r] at %d steps, first at t=%r.",
            box,
            box,
            len(violations),
            violations[0],
        )
    return times, states, violations


def integrate(
    x0: OpinionState,
    graph: InfluenceGraph,
    platform: PlatformParams,
    horizon: float,
    step: float = DEFAULT_STEP,
    *,
    sample_every: Optional[float] = None,
) -> Trajectory:
    """
    Fixed-step classical RK4 trajectory of the opinion dynamics.

    The step is refined automatically to respect step <= epsilon/(10 b).
    The final recorded time is >= x0.time + horizon. States leaving the
    invariant box are reported in ``Trajectory.box_violations``, never clamped.
    """
    if not step > 0:
        raise InvalidArgument(f"step must be positive, got {step!r}")
    if not horizon >= step:
        raise InvalidArgument(f"horizon must be at least one step, got horizon={horizon!r} step={step!r}")
    b = _check_dimensions(len(x0), graph, platform)
    scale, scaled = rescale_slant(platform)
    h = step_guard(step, platform, horizon=horizon)
    every = _sampling(h, sample_every)
    n_steps = math.ceil(horizon / (h * every) - 1e-9) * every
    field_ = make_field(graph.laplacian, b, scaled.epsilon, scaled.alpha)
    box = x0.box_bound / scale
    times, states, violations = run_rk4(field_, x0.opinions / scale, x0.time, n_steps, h, every, box)
    return Trajectory(
        times=times,
        states=states * scale,
        step_size=h * every,
        integration_step=h,
        box_violations=tuple(violations),
    )
