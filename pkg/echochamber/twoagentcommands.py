from __future__ import annotations

import argparse
import logging

from .abc import CommandMixin
from .constants import DEFAULT_EPSILON, DEFAULT_TOL, DEFAULT_WINDOW, ClassificationKind, ExitCode
from .converters import finite_float, positive_float, positive_int
from .errors import ArgParserFailure
from .helpers import render_table, trajectory_rows, write_csv
from .simulation import SimulationSettings
from .twoagent import (
    TwoAgentSystem,
    band_crossing,
    classify,
    region_grid,
    simulate_region,
    simulate_two_agent,
    trajectory_extrema,
    write_region_csv,
)

log = logging.getLogger("echochamber")


class TwoAgentCommands(CommandMixin):
    """This class will handle the closed-form two-agent analysis."""

    def add_two_agent_parser(self, subparsers):
        parser = subparsers.add_parser("two-agent", help="Closed-form analysis of the two-agent system.")
        commands = parser.add_subparsers(dest="subcommand", metavar="{classify,simulate,region,band}")
        commands.required = True

        def system_args(sub, x_required: bool = True):
            sub.add_argument("--a", type=positive_float, default=1.0, help="Mutual influence a (default 1).")
            sub.add_argument("--b", type=positive_float, required=True, help="Platform influence b.")
            sub.add_argument("--x1", type=finite_float, required=x_required, help="Initial opinion of agent 1.")
            sub.add_argument("--x2", type=finite_float, required=x_required, help="Initial opinion of agent 2.")
            sub.add_argument(
                "--epsilon", type=positive_float, default=DEFAULT_EPSILON, help="Half-width of the sign band."
            )

        classify_parser = commands.add_parser("classify", help="Print the PD/CO classification as JSON.")
        system_args(classify_parser)
        classify_parser.set_defaults(handler=self.two_agent_classify)

        simulate_parser = commands.add_parser("simulate", help="Integrate the pair and write a t,x1,x2 CSV.")
        system_args(simulate_parser)
        self.add_integrator_args(simulate_parser, horizon=20.0)
        simulate_parser.add_argument(
            "--stop-early", action="store_true", help="Stop at the first window that meets the convergence test."
        )
        simulate_parser.set_defaults(handler=self.two_agent_simulate)

        region_parser = commands.add_parser("region", help="Classify a square grid of initial opinions to CSV.")
        region_parser.add_argument("--a", type=positive_float, default=1.0, help="Mutual influence a (default 1).")
        scale = region_parser.add_mutually_exclusive_group(required=True)
        scale.add_argument("--b", type=positive_float, help="Platform influence b.")
        scale.add_argument("--ratio", type=positive_float, help="b / a.")
        region_parser.add_argument("--min", dest="grid_min", type=finite_float, default=-3.0, help="Lower grid edge.")
        region_parser.add_argument("--max", dest="grid_max", type=finite_float, default=3.0, help="Upper grid edge.")
        region_parser.add_argument("--res", dest="resolution", type=positive_int, default=101, help="Points per axis.")
        region_parser.add_argument(
            "--simulate",
            action="store_true",
            help="Also integrate every grid point and report agreement with the classification.",
        )
        region_parser.add_argument(
            "--epsilon", type=positive_float, default=DEFAULT_EPSILON, help="Sign band for --simulate."
        )
        self.add_integrator_args(region_parser, horizon=100.0)
        region_parser.set_defaults(handler=self.two_agent_region)

        band_parser = commands.add_parser("band", help="Print the sign-band crossing coefficients as JSON.")
        band_parser.add_argument("--b", type=positive_float, required=True, help="Platform influence b.")
        band_parser.add_argument("--epsilon", type=positive_float, required=True, help="Half-width of the sign band.")
        band_parser.add_argument(
            "--x2", dest="x2_0", type=positive_float, default=None, help="Initial opinion of agent 2 (default 1.5 b)."
        )
        band_parser.set_defaults(handler=self.two_agent_band)

    @staticmethod
    def add_integrator_args(parser, horizon: float, sample_every: float = 0.01):
        parser.add_argument("--step", type=positive_float, default=1e-3, help="RK4 step (default 1e-3).")
        parser.add_argument("--horizon", type=positive_float, default=horizon, help=f"End time (default {horizon}).")
        parser.add_argument("--tol", type=positive_float, default=DEFAULT_TOL, help="Convergence tolerance.")
        parser.add_argument("--window", type=positive_float, default=DEFAULT_WINDOW, help="Convergence window.")
        parser.add_argument(
            "--sample-every",
            type=positive_float,
            default=sample_every,
            help=f"Spacing of recorded samples (default {sample_every}).",
        )

    @staticmethod
    def settings_from(args: argparse.Namespace, stop_when_converged: bool = True) -> SimulationSettings:
        return SimulationSettings(
            step=args.step,
            horizon=args.horizon,
            tol=args.tol,
            window=args.window,
            sample_every=args.sample_every,
            stop_when_converged=stop_when_converged,
        )

    @staticmethod
    def system_from(args: argparse.Namespace) -> TwoAgentSystem:
        return TwoAgentSystem(a=args.a, b=args.b, x0=(args.x1, args.x2), epsilon=args.epsilon)

    def two_agent_classify(self, args: argparse.Namespace) -> ExitCode:
        system = self.system_from(args)
        result = classify(system).to_json()
        if system.opposite_signs:
            q = system.quadrant()
            result["extrema"] = trajectory_extrema(system.a, system.b, q.u, q.v).to_json()
        self.emit_json(result)
        return ExitCode.success

    def two_agent_simulate(self, args: argparse.Namespace) -> ExitCode:
        system = self.system_from(args)
        trajectory, report = simulate_two_agent(system, self.settings_from(args, args.stop_early))
        stem = f"two_agent_{self.run_stamp()}"
        config = {"a": system.a, "b": system.b, "x0": list(system.x0), "epsilon": system.epsilon}
        manifest = self.new_manifest(args, config)
        path = write_csv(
            self.output_path(stem, ".csv"),
            ["t", "x1", "x2"],
            trajectory_rows(trajectory.times, trajectory.states, ["x1", "x2"]),
        )
        manifest.add_output(path)
        manifest.notes.update(report.to_json())
        self.close_manifest(manifest, stem)
        self.emit_json(report.to_json())
        return ExitCode.success

    def two_agent_region(self, args: argparse.Namespace) -> ExitCode:
        if args.grid_max <= args.grid_min:
            raise ArgParserFailure("two-agent region", "--max must exceed --min")
        if args.resolution < 2:
            raise ArgParserFailure("two-agent region", "--res must be at least 2")
        b = args.b if args.b is not None else args.ratio * args.a
        grid = region_grid(args.a, b, args.grid_min, args.grid_max, args.resolution)
        stem = f"two_agent_region_{self.run_stamp()}"
        manifest = self.new_manifest(
            args,
            {"a": args.a, "b": b, "min": args.grid_min, "max": args.grid_max, "resolution": args.resolution},
        )
        manifest.add_output(write_region_csv(grid, self.output_path(stem, ".csv")))
        counts = grid.counts()
        manifest.notes["counts"] = {str(k): v for k, v in counts.items()}
        if args.simulate:
            simulated = simulate_region(grid, args.epsilon, self.settings_from(args))
            manifest.notes["agreement"] = region_agreement(grid.kinds, simulated)
        self.close_manifest(manifest, stem)
        self.emit(render_table(["kind", "points"], ((str(k), v) for k, v in counts.items())))
        if args.simulate:
            self.emit_json(manifest.notes["agreement"])
        return ExitCode.success

    def two_agent_band(self, args: argparse.Namespace) -> ExitCode:
        x2_0 = args.x2_0 if args.x2_0 is not None else 1.5 * args.b
        self.emit_json(band_crossing(args.b, args.epsilon, x2_0).to_json())
        return ExitCode.success


def region_agreement(predicted, simulated) -> dict:
    """Share of non-Boundary grid points whose simulated outcome matches the prediction."""
    checked = matched = 0
    for kind, outcome in zip(predicted.ravel().tolist(), simulated.ravel().tolist()):
        if kind is ClassificationKind.boundary:
            continue
        checked += 1
        if kind.is_pd and not outcome.is_consensus and outcome.converged:
            matched += 1
        elif kind.is_co and outcome.is_consensus:
            matched += 1
    return {"checked": checked, "matched": matched, "ratio": matched / checked if checked else None}
