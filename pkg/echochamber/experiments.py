from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .constants import BlockLabel, EquilibriumKind, ExperimentName, MetricKind, Normalization
from .dynamics import OpinionState, PlatformParams, integrate, vector_field
from .equilibrium import detect_equilibrium
from .errors import EchoChamberError, InvalidArgument
from .graph import InfluenceGraph
from .helpers import render_table, trajectory_rows, write_csv
from .manifest import RunManifest
from .network import SbmConfig, generate_sbm, load_labeled_graph
from .results import TrialResult, TrialResults, consensus_interval, extremism, polarization
from .rng import Stream, TrialSeed
from .simulation import SimulationSettings, integrate_ensemble, simulate
from .twoagent import pd_equilibrium
from .types import ConsensusRow, ExtremismRow, MonotonicityRow, PolarizationRow

log = logging.getLogger("echochamber")

__all__ = [
    "ExperimentConfig",
    "ExperimentOutput",
    "draw_opinions",
    "trial_graph",
    "run_chunk",
    "run_trial",
    "run_trials",
    "effective_coupling",
    "run_polarization_experiment",
    "run_trajectory_monotonicity",
    "run_consensus_probability",
    "run_extremism_experiment",
    "run_cycle_demo",
    "run_experiment",
    "write_experiment",
]

TRIAL_FIELDS = ["trial", "b", "h", "kind", "converged", "failed", "polarization", "extremism", "settle_time"]

CYCLE_REFERENCE_TIME = 100.0
CYCLE_TAIL_START = 150.0


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """
    Everything a trial needs, resolved and validated.

    Exactly one of ``network`` (a fresh SBM graph per trial) and ``graph``
    (a fixed labeled graph, only opinions are redrawn) is set. Agents labeled
    L start in [-h, 0], agents labeled R in [0, h].
    """

    name: ExperimentName
    b_grid: Tuple[float, ...]
    h_grid: Tuple[float, ...]
    trials: int
    seed: int
    epsilon: float
    settings: SimulationSettings
    network: Optional[SbmConfig] = None
    graph: Optional[InfluenceGraph] = None
    workers: int = 1
    chunk_size: int = 64
    extremism_norm: str = "l1"
    x0: Tuple[float, ...] = ()
    resolved: Dict[str, Any] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.trials < 1:
            raise InvalidArgument(f"trials must be at least 1, got {self.trials!r}")
        if not self.b_grid or not self.h_grid:
            raise InvalidArgument("b and h grids must not be empty")
        for value in self.b_grid + self.h_grid:
            if not (math.isfinite(value) and value > 0):
                raise InvalidArgument(f"grid values must be positive, got {value!r}")
        if self.chunk_size < 1 or self.workers < 1:
            raise InvalidArgument("chunk_size and workers must be at least 1")
        if self.network is not None and self.graph is not None:
            raise InvalidArgument("use either a block model or a fixed graph, not both")
        if self.graph is not None and not self.graph.has_blocks:
            raise InvalidArgument("a fixed graph needs every agent labeled L or R and both blocks present")

    @classmethod
    def from_resolved(cls, name: ExperimentName, resolved: Mapping[str, Any]) -> ExperimentConfig:
        integrator = dict(resolved["integrator"])
        horizon = float(resolved.get("horizon", integrator["horizon"]))
        epsilon = float(resolved.get("epsilon", integrator["epsilon"]))
        settings = SimulationSettings(
            step=float(integrator["step"]),
            horizon=horizon,
            tol=float(integrator["tol"]),
            window=float(integrator["window"]),
            sample_every=float(integrator["sample_every"]),
        )
        graph_table = resolved.get("graph") or {}
        network, graph = None, None
        if graph_table.get("edges"):
            graph = load_labeled_graph(
                graph_table["edges"],
                graph_table["labels"],
                normalization=Normalization.get_from_name(str(graph_table.get("normalization", "row-normalized"))),
                a=float(graph_table.get("a", 1.0)),
            )
        else:
            table = dict(resolved["network"])
            table["seed"] = int(resolved["seed"])
            network = SbmConfig.from_json(table)
        b_grid = resolved.get("b_grid") or [resolved["b"]]
        h_grid = resolved.get("h_grid") or [1.0]
        return cls(
            name=name,
            b_grid=tuple(float(i) for i in b_grid),
            h_grid=tuple(float(i) for i in h_grid),
            trials=int(resolved["trials"]),
            seed=int(resolved["seed"]),
            epsilon=epsilon,
            settings=settings,
            network=network,
            graph=graph,
            workers=int(resolved.get("workers", 1)),
            chunk_size=int(resolved.get("chunk_size", 64)),
            extremism_norm=str(resolved.get("extremism_norm", "l1")),
            x0=tuple(float(i) for i in resolved.get("x0", ())),
            resolved=dict(resolved),
        )

    @property
    def fixed_graph(self) -> bool:
        return self.graph is not None

    @property
    def labels(self) -> Tuple[BlockLabel, ...]:
        return self.graph.labels if self.graph is not None else self.network.labels

    @property
    def n_agents(self) -> int:
        return len(self.labels)


@dataclass
class ExperimentOutput:
    """Tables produced by one experiment, ready to be written and printed."""

    name: ExperimentName
    fieldnames: List[str]
    rows: List[Mapping[str, Any]]
    results: Optional[TrialResults] = None
    notes: Dict[str, Any] = field(default_factory=dict)
    extra: Dict[str, Tuple[List[str], List[Mapping[str, Any]]]] = field(default_factory=dict)

    @property
    def trials(self) -> int:
        return len(self.results) if self.results is not None else 0

    @property
    def failed(self) -> int:
        return self.results.failed if self.results is not None else 0

    @property
    def success_ratio(self) -> float:
        return self.results.success_ratio if self.results is not None else 1.0

    def table(self, precision: int = 4) -> str:
        return render_table(self.fieldnames, ([row.get(i) for i in self.fieldnames] for row in self.rows), precision)


def draw_opinions(cfg: ExperimentConfig, h: float, trial: int) -> np.ndarray:
    """
    Initial opinions of one trial.

    The same uniform draws are reused for every (b, h) so that grids are
    compared on common random numbers; only the scale h changes.
    """
    signs = np.array([label.sign for label in cfg.labels], dtype=np.float64)
    u = TrialSeed(cfg.seed, trial, Stream.opinions).generator().random(signs.shape[0])
    return signs * h * u


def trial_graph(cfg: ExperimentConfig, trial: int) -> InfluenceGraph:
    if cfg.graph is not None:
        return cfg.graph
    return generate_sbm(cfg.network, trial)


def run_chunk(
    cfg: ExperimentConfig,
    b: float,
    h: float,
    trials: Sequence[int],
    observe: bool = False,
) -> Tuple[List[TrialResult], Optional[np.ndarray], Optional[np.ndarray]]:
    """
    Integrate a batch of trials at one (b, h) point.

    Returns the trial results and, with ``observe``, the sample times and the
    (samples, len(trials)) polarization series. A chunk that raises is
    recorded as failed trials instead of aborting the sweep.
    """
    trials = list(trials)
    try:
        graphs = [trial_graph(cfg, i) for i in trials]
        x0s = np.stack([draw_opinions(cfg, h, i) for i in trials])
        laplacians = graphs[0].laplacian if cfg.fixed_graph else np.stack([g.laplacian for g in graphs])
        left = np.array([i for i, lab in enumerate(cfg.labels) if lab is BlockLabel.left])
        right = np.array([i for i, lab in enumerate(cfg.labels) if lab is BlockLabel.right])
        ensemble = integrate_ensemble(
            x0s,
            laplacians,
            b,
            cfg.epsilon,
            1.0,
            cfg.settings,
            observer=(lambda x: polarization(x, left, right)) if observe else None,
        )
    except EchoChamberError:
        log.exception("Trials %d..%d failed at b=%r h=%r.", trials[0], trials[-1], b, h)
        return [TrialResult.failure(i, b, h) for i in trials], None, None

    results = []
    final_polarization = polarization(ensemble.final, left, right)
    final_extremism = extremism(ensemble.final, cfg.extremism_norm)
    for k, trial in enumerate(trials):
        if ensemble.failed[k]:
            results.append(TrialResult.failure(trial, b, h))
            continue
        settle = ensemble.settle_times[k]
        results.append(
            TrialResult(
                trial=trial,
                b=b,
                h=h,
                kind=ensemble.kinds[k],
                polarization=float(final_polarization[k]),
                extremism=float(final_extremism[k]),
                settle_time=None if np.isnan(settle) else float(settle),
            )
        )
    nonconverged = sum(1 for i in results if not i.failed and not i.converged)
    if nonconverged:
        log.warning(
            "%d of %d trials did not converge by t=%r (b=%r h=%r).",
            nonconverged,
            len(trials),
            cfg.settings.horizon,
            b,
            h,
        )
    log.debug("Finished trials %d..%d at b=%r h=%r.", trials[0], trials[-1], b, h)
    return results, ensemble.times, ensemble.series


def run_trial(cfg: ExperimentConfig, b: float, h: float, trial: int) -> TrialResult:
    """One trial on its own; identical to the same trial run inside any chunk."""
    return run_chunk(cfg, b, h, [trial])[0][0]


def _chunks(trials: int, size: int) -> List[List[int]]:
    return [list(range(start, min(start + size, trials))) for start in range(0, trials, size)]


def run_trials(
    cfg: ExperimentConfig,
    points: Iterable[Tuple[float, float]],
    observe: bool = False,
) -> Tuple[TrialResults, Dict[Tuple[float, float], Tuple[np.ndarray, np.ndarray]]]:
    """
    Run ``cfg.trials`` trials at every (b, h) point.

    Chunks go to a process pool when ``cfg.workers`` > 1. Results are keyed by
    trial index, so the outcome does not depend on the worker count or on the
    order chunks finish in.
    """
    jobs = [(b, h, chunk) for b, h in points for chunk in _chunks(cfg.trials, cfg.chunk_size)]
    results = TrialResults()
    series: Dict[Tuple[float, float], List[Tuple[List[int], np.ndarray, np.ndarray]]] = {}

    def collect(b: float, h: float, chunk: List[int], outcome):
        chunk_results, times, values = outcome
        results.extend(chunk_results)
        if observe:
            series.setdefault((b, h), []).append((chunk, times, values))

    log.info("Running %d trials per point in %d chunks.", cfg.trials, len(jobs))
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futures = [(b, h, chunk, pool.submit(run_chunk, cfg, b, h, chunk, observe)) for b, h, chunk in jobs]
            for b, h, chunk, future in futures:
                collect(b, h, chunk, future.result())
    else:
        for b, h, chunk in jobs:
            collect(b, h, chunk, run_chunk(cfg, b, h, chunk, observe))

    return results, {key: _join_series(parts) for key, parts in series.items()}


def _join_series(parts) -> Tuple[np.ndarray, np.ndarray]:
    """
    Pad every chunk's series to the longest time grid by holding its last
    sample, then join by trial. Chunks that failed outright become NaN columns.
    """
    recorded = [part for part in parts if part[2] is not None]
    if not recorded:
        return np.zeros(0), np.zeros((0, sum(len(part[0]) for part in parts)))
    longest = max(recorded, key=lambda part: part[1].shape[0])[1]
    columns = []
    for chunk, times, values in sorted(parts, key=lambda part: part[0][0]):
        if values is None:
            columns.append(np.full((longest.shape[0], len(chunk)), np.nan))
            continue
        missing = longest.shape[0] - times.shape[0]
        if missing:
            values = np.concatenate([values, np.repeat(values[-1:], missing, axis=0)])
        columns.append(values)
    return longest, np.concatenate(columns, axis=1)


def effective_coupling(cfg: ExperimentConfig) -> float:
    """
    Strength of the cross-block pull in the two-agent system a network reduces to.

    Block models use their limits, a q / (p + q) row-normalized and a n q with
    unit weights. Fixed graphs use the realized per-agent cross-block share.
    """
    if cfg.network is not None:
        net = cfg.network
        if net.normalization is Normalization.unit_weight:
            return net.a * net.n * net.q
        return net.a * net.beta
    same, cross = cfg.graph.block_degrees()
    if cfg.graph.normalization is Normalization.unit_weight:
        return cfg.graph.a * float(cross.mean())
    total = same + cross
    share = np.divide(cross, total, out=np.zeros(total.shape), where=total > 0)
    return cfg.graph.a * float(share[total > 0].mean())


def theoretical_polarization(cfg: ExperimentConfig, b: float) -> float:
    _, polarization = pd_equilibrium(effective_coupling(cfg), b)
    return polarization


def _percentiles(values: Sequence[float], percentiles: Sequence[float]) -> List[Optional[float]]:
    if not len(values):
        return [None] * len(percentiles)
    return [float(i) for i in np.percentile(np.asarray(values, dtype=np.float64), percentiles)]


def run_polarization_experiment(cfg: ExperimentConfig) -> ExperimentOutput:
    """Distribution of the final polarization of persistently disagreeing trials, per b."""
    points = [(b, h) for b in cfg.b_grid for h in cfg.h_grid]
    results, _ = run_trials(cfg, points)
    rows: List[PolarizationRow] = []
    for b, h in points:
        persistent = results.persistent(b, h)
        q05, q50, q95 = results.series(MetricKind.polarization, persistent, (5, 50, 95)).quantiles.values()
        if not persistent:
            log.info("No persistent disagreement among %d trials at b=%r h=%r.", cfg.trials, b, h)
        rows.append(
            PolarizationRow(
                b=b,
                h=h,
                trials=len(results.get(b, h)),
                pd_trials=len(persistent),
                consensus_trials=len(results.consensus(b, h)),
                nonconverged_trials=results.nonconverged(b, h),
                q05=q05,
                q50=q50,
                q95=q95,
                theory=theoretical_polarization(cfg, b),
            )
        )
    return ExperimentOutput(
        name=cfg.name,
        fieldnames=list(PolarizationRow.__annotations__),
        rows=rows,
        results=results,
        notes={"coupling": effective_coupling(cfg)},
    )


def _monotonicity_violation(mean: np.ndarray) -> float:
    """Largest step of the mean series against its overall direction."""
    if mean.shape[0] < 2:
        return 0.0
    direction = 1.0 if mean[-1] >= mean[0] else -1.0
    return float(max(0.0, np.max(-direction * np.diff(mean))))


def run_trajectory_monotonicity(cfg: ExperimentConfig) -> ExperimentOutput:
    """Mean and standard deviation of the polarization path across trials, per h."""
    b = cfg.b_grid[0]
    points = [(b, h) for h in cfg.h_grid]
    run_cfg = _with_settings(cfg, replace(cfg.settings, stop_when_converged=False))
    results, series = run_trials(run_cfg, points, observe=True)
    rows: List[MonotonicityRow] = []
    diagnostics = {}
    terminal = []
    for b, h in points:
        if (b, h) not in series:
            continue
        times, values = series[(b, h)]
        keep = np.array([not i.failed for i in results.get(b, h)], dtype=bool)
        values = values[:, keep]
        if not times.size or not values.shape[1]:
            log.warning("No usable polarization series at h=%r.", h)
            continue
        mean, sd = values.mean(axis=1), values.std(axis=1)
        for t, m, s in zip(times.tolist(), mean.tolist(), sd.tolist()):
            rows.append(MonotonicityRow(h=h, t=t, mean=m, sd=s, trials=int(keep.sum())))
        violation = _monotonicity_violation(mean)
        diagnostics[repr(h)] = {
            "direction": "increasing" if mean[-1] >= mean[0] else "decreasing",
            "max_violation": violation,
            "within_sd_band": bool(violation <= float(sd.max())),
            "terminal_mean": float(mean[-1]),
        }
        terminal.append(float(mean[-1]))
    spread = (max(terminal) - min(terminal)) / abs(np.mean(terminal)) if terminal and np.mean(terminal) else None
    return ExperimentOutput(
        name=cfg.name,
        fieldnames=list(MonotonicityRow.__annotations__),
        rows=rows,
        results=results,
        notes={"b": b, "series": diagnostics, "terminal_relative_spread": spread},
    )


def run_consensus_probability(cfg: ExperimentConfig) -> ExperimentOutput:
    """Share of converged trials that end in consensus, per h, with p +- 2 sqrt(p (1 - p) / N)."""
    b = cfg.b_grid[0]
    points = [(b, h) for h in cfg.h_grid]
    results, _ = run_trials(cfg, points)
    rows: List[ConsensusRow] = []
    for b, h in points:
        converged = results.converged(b, h)
        consensus = results.consensus(b, h)
        probability = len(consensus) / len(converged) if converged else 0.0
        lower, upper = consensus_interval(probability, max(1, len(converged)))
        rows.append(
            ConsensusRow(
                b=b,
                h=h,
                trials=len(results.get(b, h)),
                consensus_trials=len(consensus),
                nonconverged_trials=results.nonconverged(b, h),
                probability=probability,
                lower=lower,
                upper=upper,
            )
        )
    return ExperimentOutput(
        name=cfg.name, fieldnames=list(ConsensusRow.__annotations__), rows=rows, results=results, notes={"b": b}
    )


def run_extremism_experiment(cfg: ExperimentConfig) -> ExperimentOutput:
    """
    Quartiles of the final extremism per b, with its decomposition.

    Over converged trials the unconditional mean equals
    P(consensus) * mean | consensus + P(PD) * mean | PD.
    """
    points = [(b, h) for b in cfg.b_grid for h in cfg.h_grid]
    results, _ = run_trials(cfg, points)
    rows: List[ExtremismRow] = []
    for b, h in points:
        converged = results.converged(b, h)
        overall = results.series(MetricKind.extremism, converged, (25, 50, 75))
        q25, q50, q75 = overall.quantiles.values()
        consensus = results.series(MetricKind.extremism, results.consensus(b, h))
        persistent = results.series(MetricKind.extremism, results.persistent(b, h))
        rows.append(
            ExtremismRow(
                b=b,
                h=h,
                trials=len(results.get(b, h)),
                q25=q25,
                q50=q50,
                q75=q75,
                consensus_probability=len(consensus) / len(converged) if converged else None,
                mean_extremism=overall.mean,
                mean_extremism_pd=persistent.mean,
                mean_extremism_consensus=consensus.mean,
            )
        )
    return ExperimentOutput(
        name=cfg.name,
        fieldnames=list(ExtremismRow.__annotations__),
        rows=rows,
        results=results,
        notes={"norm": cfg.extremism_norm},
    )


def run_cycle_demo(cfg: ExperimentConfig) -> ExperimentOutput:
    """
    Four agents on a directed cycle, each listening only to the next one.

    The trajectory keeps cycling instead of settling. The recurrence distance
    is the closest the tail comes back to the state at t=100; the tail residual
    is the smallest sup-norm of the vector field over the tail. The undirected
    version of the same cycle settles.
    """
    x0 = cfg.x0 or (-0.5, 1.0, 0.5, -1.0)
    graph = InfluenceGraph.directed_cycle(len(x0), a=1.0)
    platform = PlatformParams.uniform(cfg.b_grid[0], cfg.epsilon)
    state = OpinionState(np.array(x0, dtype=np.float64))
    horizon = cfg.settings.horizon
    trajectory = integrate(state, graph, platform, horizon, cfg.settings.step, sample_every=cfg.settings.sample_every)
    report = detect_equilibrium(trajectory, graph, platform, cfg.settings.tol, cfg.settings.window)

    reference = trajectory.at(min(CYCLE_REFERENCE_TIME, horizon)).opinions
    tail = trajectory.window(min(CYCLE_TAIL_START, horizon), horizon)
    recurrence = float(np.min(np.max(np.abs(tail.states - reference), axis=1)))
    tail_residual = min(float(np.max(np.abs(vector_field(s, graph, platform)))) for s in tail)
    _, symmetric_report = simulate(state, graph.symmetrized(), platform, cfg.settings)
    if report.kind is EquilibriumKind.non_convergent:
        log.info("Directed cycle is still moving at t=%r (tail residual %r).", horizon, tail_residual)

    names = [f"x{i + 1}" for i in range(graph.n)]
    return ExperimentOutput(
        name=cfg.name,
        fieldnames=["t"] + names,
        rows=list(trajectory_rows(trajectory.times, trajectory.states, names)),
        notes={
            "kind": str(report.kind),
            "recurrence_distance": recurrence,
            "tail_residual": tail_residual,
            "symmetrized_kind": str(symmetric_report.kind),
            "symmetrized_settle_time": symmetric_report.settle_time,
        },
    )


def _with_settings(cfg: ExperimentConfig, settings: SimulationSettings) -> ExperimentConfig:
    return replace(cfg, settings=settings)


RUNNERS: Dict[ExperimentName, Callable[[ExperimentConfig], ExperimentOutput]] = {
    ExperimentName.polarization: run_polarization_experiment,
    ExperimentName.monotonicity: run_trajectory_monotonicity,
    ExperimentName.consensus_prob: run_consensus_probability,
    ExperimentName.extremism: run_extremism_experiment,
    ExperimentName.cycle_demo: run_cycle_demo,
}


def run_experiment(cfg: ExperimentConfig) -> ExperimentOutput:
    log.info("Starting %s experiment (seed %d, %d trials).", cfg.name, cfg.seed, cfg.trials)
    output = RUNNERS[cfg.name](cfg)
    log.info("Finished %s experiment, %d failed trials.", cfg.name, output.failed)
    return output


def write_experiment(
    output: ExperimentOutput,
    manifest: RunManifest,
    directory: Path,
    stamp: str,
) -> List[Path]:
    """Write ``<experiment>_<stamp>.csv``, the per-trial CSV and the JSON manifest."""
    stem = f"{output.name.file_stem}_{stamp}"
    written = [write_csv(directory / f"{stem}.csv", output.fieldnames, output.rows)]
    if output.results is not None:
        written.append(write_csv(directory / f"{stem}_trials.csv", TRIAL_FIELDS, output.results.rows()))
    for suffix, (fieldnames, rows) in output.extra.items():
        written.append(write_csv(directory / f"{stem}_{suffix}.csv", fieldnames, rows))
    for path in written:
        manifest.add_output(path)
    manifest.trials = output.trials
    manifest.failed_trials = output.failed
    manifest.notes.update(output.notes)
    manifest.finish()
    written.append(manifest.write(directory / f"{stem}.json"))
    return written
