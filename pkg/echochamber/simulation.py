from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple, Union

import numpy as np

from .constants import (
    BOX_SLACK,
    DEFAULT_HORIZON,
    DEFAULT_STEP,
    DEFAULT_TOL,
    DEFAULT_WINDOW,
    EquilibriumKind,
)
from .dynamics import (
    OpinionState,
    PlatformParams,
    Trajectory,
    _check_dimensions,
    make_field,
    rescale_slant,
    rk4_step,
    run_rk4,
    step_guard,
)
from .equilibrium import EquilibriumReport, classify_limit, detect_equilibrium
from .errors import InvalidArgument
from .graph import InfluenceGraph

log = logging.getLogger("echochamber")

__all__ = ["SimulationSettings", "EnsembleResult", "simulate", "integrate_ensemble"]

Observer = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class SimulationSettings:
    step: float = DEFAULT_STEP
    horizon: float = DEFAULT_HORIZON
    tol: float = DEFAULT_TOL
    window: float = DEFAULT_WINDOW
    sample_every: Optional[float] = None
    stop_when_converged: bool = True

    def __post_init__(self):
        for name in ("step", "horizon", "tol", "window"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InvalidArgument(f"{name} must be positive, got {value!r}")
        if self.horizon < self.step:
            raise InvalidArgument("horizon must be at least one step")
        if self.sample_every is not None and not self.sample_every > 0:
            raise InvalidArgument(f"sample_every must be positive, got {self.sample_every!r}")

    @classmethod
    def from_json(cls, data: dict) -> SimulationSettings:
        known = {k: data[k] for k in ("step", "horizon", "tol", "window", "sample_every") if k in data}
        return cls(**known)

    def to_json(self) -> dict:
        return {
            "step": self.step,
            "horizon": self.horizon,
            "tol": self.tol,
            "window": self.window,
            "sample_every": self.sample_every,
        }

    def chunking(self, h: float) -> Tuple[int, int, int]:
        """(steps between samples, steps per window, number of windows) for integration step h."""
        every = 1 if self.sample_every is None else max(1, int(round(self.sample_every / h)))
        per_window = max(1, math.ceil(self.window / (h * every) - 1e-9)) * every
        windows = max(1, math.ceil(self.horizon / (h * per_window) - 1e-9))
        return every, per_window, windows


def simulate(
    x0: OpinionState,
    graph: InfluenceGraph,
    platform: PlatformParams,
    settings: SimulationSettings = SimulationSettings(),
) -> Tuple[Trajectory, EquilibriumReport]:
    """
    Integrate window by window and stop as soon as the trajectory settles.

    Samples are kept every ``settings.sample_every`` time units (every step
    when unset). The report is judged on the whole recorded trajectory.
    """
    b = _check_dimensions(len(x0), graph, platform)
    scale, scaled = rescale_slant(platform)
    h = step_guard(settings.step, platform, horizon=settings.horizon)
    every, per_window, windows = settings.chunking(h)
    field_ = make_field(graph.laplacian, b, scaled.epsilon, scaled.alpha)
    box = x0.box_bound / scale

    trajectory: Optional[Trajectory] = None
    x, t = x0.opinions / scale, x0.time
    for index in range(windows):
        times, states, violations = run_rk4(field_, x, t, per_window, h, every, box)
        chunk = Trajectory(
            times=times,
            states=states * scale,
            step_size=h * every,
            integration_step=h,
            box_violations=tuple(violations),
        )
        trajectory = chunk if trajectory is None else trajectory.concat(chunk)
        x, t = states[-1], float(times[-1])
        if settings.stop_when_converged:
            # the chunk spans exactly one window, so judging it alone is enough
            report = detect_equilibrium(chunk, graph, platform, settings.tol, settings.window)
            if report.converged:
                log.debug("Converged after %d windows at t=%r", index + 1, t)
                break
    report = detect_equilibrium(trajectory, graph, platform, settings.tol, settings.window)
    if report.kind is EquilibriumKind.non_convergent:
        log.info("No equilibrium detected by t=%r (residual %r).", trajectory.horizon, report.residual)
    return trajectory, report


@dataclass(frozen=True, eq=False)
class EnsembleResult:
    """
    Final states of independently integrated ensemble members.

    ``settle_times`` holds the end of the first window on which a member met
    the convergence criterion (NaN if it never did). ``series`` holds the
    observer's values at every sample time when an observer was given.
    """

    final: np.ndarray
    settle_times: np.ndarray
    kinds: Tuple[EquilibriumKind, ...]
    failed: np.ndarray
    times: Optional[np.ndarray] = None
    series: Optional[np.ndarray] = None

    def __len__(self):
        return self.final.shape[0]

    @property
    def converged(self) -> np.ndarray:
        return np.array([kind.converged for kind in self.kinds], dtype=bool)


def _member_array(value: Union[float, np.ndarray], m: int, n: int, name: str) -> np.ndarray:
    value = np.asarray(value, dtype=np.float64)
    if value.ndim == 0:
        return np.full((m, n), float(value))
    if value.shape == (n,):
        return np.broadcast_to(value, (m, n)).copy()
    if value.shape == (m, n):
        return value.copy()
    raise InvalidArgument(f"{name} must be a scalar, ({n},) or ({m}, {n}), got shape {value.shape}")


def integrate_ensemble(
    x0s: np.ndarray,
    laplacians: np.ndarray,
    b: Union[float, np.ndarray],
    epsilon: float,
    alpha: float = 1.0,
    settings: SimulationSettings = SimulationSettings(),
    observer: Optional[Observer] = None,
) -> EnsembleResult:
    """
    Batched RK4 over independent members sharing n, epsilon and alpha.

    ``laplacians`` is one (n, n) matrix shared by all members or a stack
    (m, n, n). Members are frozen at the end of the first window on which
    they meet the convergence criterion; only active members are advanced.
    Each member's social term is its own matrix-vector product, so its
    arithmetic does not depend on the rest of the batch.
    """
    x0s = np.array(x0s, dtype=np.float64, copy=True)
    if x0s.ndim != 2:
        raise InvalidArgument(f"x0s must be an (m, n) array, got shape {x0s.shape}")
    m, n = x0s.shape
    laplacians = np.asarray(laplacians, dtype=np.float64)
    if laplacians.shape not in ((n, n), (m, n, n)):
        raise InvalidArgument(f"laplacians must be ({n}, {n}) or ({m}, {n}, {n}), got {laplacians.shape}")
    stacked = laplacians.ndim == 3
    b_all = _member_array(b, m, n, "b")
    platform = PlatformParams(b=np.array([b_all.max(initial=0.0)]), epsilon=epsilon, alpha=alpha)
    scale, scaled = rescale_slant(platform)
    h = step_guard(settings.step, platform, horizon=settings.horizon)
    every, per_window, windows = settings.chunking(h)

    x = x0s / scale
    box = np.maximum(np.max(np.abs(x0s), axis=1), 1.0) / scale
    settle = np.full(m, np.nan)
    failed = np.zeros(m, dtype=bool)
    active = np.ones(m, dtype=bool)
    recorded_times: List[float] = []
    recorded: List[np.ndarray] = []

    def observe(t: float):
        if observer is not None:
            recorded_times.append(t)
            recorded.append(np.asarray(observer(x * scale), dtype=np.float64))

    observe(0.0)
    box_exits = 0
    t = 0.0
    for window_index in range(windows):
        index = np.nonzero(active)[0]
        if not index.size:
            break
        field_ = make_field(laplacians[index] if stacked else laplacians, b_all[index], scaled.epsilon, scaled.alpha)
        start = x[index]
        xi = start
        samples = [start]
        with np.errstate(over="ignore", invalid="ignore"):
            for k in range(1, per_window + 1):
                xi = rk4_step(field_, xi, h)
                if k % every == 0:
                    samples.append(xi)
                    if observer is not None:
                        x[index] = xi
                        observe(t + k * h)
        t += per_window * h
        bad = ~np.isfinite(xi).all(axis=1)
        if bad.any():
            log.warning("%d ensemble members produced non-finite opinions by t=%r.", int(bad.sum()), t)
            failed[index[bad]] = True
            active[index[bad]] = False
            xi = np.where(bad[:, None], start, xi)
        box_exits += int((np.max(np.abs(xi), axis=1) > box[index] + BOX_SLACK).sum())
        x[index] = xi
        if not settings.stop_when_converged:
            continue
        field_now = field_(xi)
        residual = np.max(np.abs(field_now), axis=1) * scale
        # furthest any sample of the window strays from where the member ends
        with np.errstate(invalid="ignore"):
            movement = np.max(np.abs(np.stack(samples) - xi), axis=(0, 2)) * scale
        done = (residual < settings.tol) & (movement < settings.tol * settings.window) & ~bad
        settle[index[done]] = t
        active[index[done]] = False
        log.debug("Window %d: %d of %d members still active.", window_index + 1, int(active.sum()), m)

    if box_exits:
        log.warning("Ensemble members left their invariant box %d times.", box_exits)
    final = x * scale
    kinds = []
    for i in range(m):
        if failed[i] or np.isnan(settle[i]):
            kinds.append(EquilibriumKind.non_convergent)
        else:
            kinds.append(classify_limit(final[i], settings.tol, alpha))
    if not settings.stop_when_converged:
        # judge every member once at the horizon
        field_all = make_field(laplacians, b_all, scaled.epsilon, scaled.alpha)
        residual = np.max(np.abs(field_all(x)), axis=1) * scale
        kinds = [
            EquilibriumKind.non_convergent if failed[i] or residual[i] >= settings.tol else classify_limit(
                final[i], settings.tol, alpha
            )
            for i in range(m)
        ]
        settle = np.where(residual < settings.tol, t, np.nan)
    return EnsembleResult(
        final=final,
        settle_times=settle,
        kinds=tuple(kinds),
        failed=failed,
        times=np.array(recorded_times) if observer is not None else None,
        series=np.stack(recorded) if observer is not None else None,
    )
