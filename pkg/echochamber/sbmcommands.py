from __future__ import annotations

import argparse
import logging

import numpy as np

from .abc import CommandMixin
from .constants import BlockLabel, ExitCode, Normalization
from .converters import EnumAction, finite_float, positive_float, positive_int, probability, unit_interval_open
from .defaults import default_integrator, default_network
from .dynamics import OpinionState, PlatformParams
from .errors import ArgParserFailure
from .helpers import render_table, trajectory_rows, write_csv
from .network import (
    SbmConfig,
    block_means,
    concentration_bound_union,
    concentration_check,
    generate_sbm,
    envelope_contains,
    integrate_envelopes,
    load_labeled_graph,
    mean_field_prediction,
    write_labeled_graph,
)
from .results import extremism, polarization
from .rng import Stream, TrialSeed
from .simulation import SimulationSettings, simulate

log = logging.getLogger("echochamber")


class SbmCommands(CommandMixin):
    """This class will handle two-block stochastic block model graphs."""

    def add_sbm_parser(self, subparsers):
        parser = subparsers.add_parser("sbm", help="Two-block stochastic block model graphs.")
        commands = parser.add_subparsers(dest="subcommand", metavar="{generate,simulate,check}")
        commands.required = True

        def model_args(sub):
            sub.add_argument("--n", type=positive_int, default=default_network["n"], help="Agents per block.")
            sub.add_argument("--p", type=probability, default=default_network["p"], help="Same-block edge probability.")
            sub.add_argument(
                "--q", type=probability, default=default_network["q"], help="Cross-block edge probability."
            )
            sub.add_argument("--a", type=positive_float, default=default_network["a"], help="Influence budget a.")
            sub.add_argument(
                "--normalization",
                type=Normalization,
                action=EnumAction,
                default=Normalization.row_normalized,
                help="Edge weighting (default row-normalized).",
            )
            sub.add_argument("--seed", type=int, default=0, help="Experiment seed.")
            sub.add_argument("--trial", type=int, default=0, help="Trial index whose graph stream is used.")

        generate_parser = commands.add_parser("generate", help="Write an edge list and a labels file.")
        model_args(generate_parser)
        generate_parser.set_defaults(handler=self.sbm_generate)

        simulate_parser = commands.add_parser("simulate", help="Run one trajectory on a generated graph.")
        model_args(simulate_parser)
        simulate_parser.add_argument("--b", type=positive_float, required=True, help="Platform influence b.")
        simulate_parser.add_argument(
            "--h", type=positive_float, default=2.0, help="Initial opinions are Unif[-h, 0] (L) and Unif[0, h] (R)."
        )
        simulate_parser.add_argument(
            "--epsilon", type=positive_float, default=default_integrator["epsilon"], help="Half-width of the sign band."
        )
        simulate_parser.add_argument(
            "--step", type=positive_float, default=default_integrator["step"], help="RK4 step."
        )
        simulate_parser.add_argument(
            "--horizon", type=positive_float, default=default_integrator["horizon"], help="End time."
        )
        simulate_parser.add_argument(
            "--tol", type=positive_float, default=default_integrator["tol"], help="Convergence tolerance."
        )
        simulate_parser.add_argument(
            "--window", type=positive_float, default=default_integrator["window"], help="Convergence window."
        )
        simulate_parser.add_argument(
            "--sample-every", type=positive_float, default=default_integrator["sample_every"], help="Sample spacing."
        )
        simulate_parser.add_argument(
            "--xL", type=finite_float, default=None, help="Start every L agent here instead of drawing opinions."
        )
        simulate_parser.add_argument(
            "--xR", type=finite_float, default=None, help="Start every R agent here instead of drawing opinions."
        )
        simulate_parser.add_argument(
            "--envelope-delta",
            type=unit_interval_open,
            default=None,
            help="Also integrate the block envelopes for this delta and check the agents stay inside them. "
            "Needs --xL and --xR.",
        )
        simulate_parser.set_defaults(handler=self.sbm_simulate)

        check_parser = commands.add_parser("check", help="Print the concentration check as JSON.")
        model_args(check_parser)
        check_parser.add_argument("--delta", type=unit_interval_open, required=True, help="Relative degree band.")
        check_parser.add_argument("--edges", default=None, help="Check this edge list instead of a generated graph.")
        check_parser.add_argument("--labels", default=None, help="Labels file for --edges.")
        check_parser.set_defaults(handler=self.sbm_check)

    @staticmethod
    def model_from(args: argparse.Namespace) -> SbmConfig:
        return SbmConfig(n=args.n, p=args.p, q=args.q, normalization=args.normalization, a=args.a, seed=args.seed)

    def sbm_generate(self, args: argparse.Namespace) -> ExitCode:
        cfg = self.model_from(args)
        graph = generate_sbm(cfg, args.trial)
        stem = f"sbm_{self.run_stamp()}"
        manifest = self.new_manifest(args, dict(cfg.to_json(), trial=args.trial), seed=cfg.seed)
        edges, labels = write_labeled_graph(
            graph, self.output_path(stem, "_edges.txt"), self.output_path(stem, "_labels.txt")
        )
        manifest.add_output(edges)
        manifest.add_output(labels)
        same, cross = graph.block_degrees()
        manifest.notes.update(
            edges=int(sum(1 for _ in graph.edges())),
            mean_same_degree=float(same.mean()),
            mean_cross_degree=float(cross.mean()),
        )
        self.close_manifest(manifest, stem)
        self.emit_json(manifest.notes)
        return ExitCode.success

    def sbm_simulate(self, args: argparse.Namespace) -> ExitCode:
        cfg = self.model_from(args)
        if (args.xL is None) != (args.xR is None):
            raise ArgParserFailure("sbm simulate", "--xL and --xR must be given together")
        if args.envelope_delta is not None and args.xL is None:
            raise ArgParserFailure("sbm simulate", "--envelope-delta needs block-constant starts, give --xL and --xR")
        graph = generate_sbm(cfg, args.trial)
        if args.xL is not None:
            opinions = np.array([args.xL if label is BlockLabel.left else args.xR for label in graph.labels])
        else:
            signs = np.array([label.sign for label in graph.labels], dtype=np.float64)
            opinions = signs * args.h * TrialSeed(cfg.seed, args.trial, Stream.opinions).generator().random(graph.n)
        state = OpinionState(opinions)
        platform = PlatformParams.uniform(args.b, args.epsilon)
        settings = SimulationSettings(
            step=args.step,
            horizon=args.horizon,
            tol=args.tol,
            window=args.window,
            sample_every=args.sample_every,
        )
        trajectory, report = simulate(state, graph, platform, settings)

        stem = f"sbm_simulate_{self.run_stamp()}"
        config = dict(
            cfg.to_json(), trial=args.trial, b=args.b, h=args.h, xL=args.xL, xR=args.xR, epsilon=args.epsilon
        )
        config.update(settings.to_json())
        manifest = self.new_manifest(args, config, seed=cfg.seed)
        trajectory_path = write_csv(
            self.output_path(stem, "_trajectory.csv"),
            ["t"] + [f"x{i + 1}" for i in range(graph.n)],
            trajectory_rows(trajectory.times, trajectory.states),
        )
        manifest.add_output(trajectory_path)
        left = graph.block_indices(BlockLabel.left)
        right = graph.block_indices(BlockLabel.right)
        metrics = [
            {"t": t, "polarization": p, "extremism": e}
            for t, p, e in zip(
                trajectory.times.tolist(),
                polarization(trajectory.states, left, right).tolist(),
                extremism(trajectory.states).tolist(),
            )
        ]
        metrics_path = write_csv(self.output_path(stem, "_metrics.csv"), ["t", "polarization", "extremism"], metrics)
        manifest.add_output(metrics_path)
        mean_L, mean_R = block_means(state, graph)
        prediction = mean_field_prediction(cfg.a, args.b, cfg.p, cfg.q, mean_L, mean_R, cfg.normalization, cfg.n)
        manifest.notes.update(report=report.to_json(), mean_field=prediction.to_json())
        if args.envelope_delta is not None:
            envelopes = integrate_envelopes(
                cfg.a,
                args.b,
                cfg.p,
                cfg.q,
                args.envelope_delta,
                mean_L,
                mean_R,
                args.epsilon,
                horizon=trajectory.horizon,
                step=args.step,
                sample_every=args.sample_every,
            )
            check = envelope_contains(trajectory, envelopes, graph)
            manifest.notes["envelopes"] = {
                "regime_held": envelopes.regime_held,
                "contained": check.contained,
                "worst_violation": check.worst_violation,
                "worst_time": check.worst_time,
            }
        self.close_manifest(manifest, stem)
        self.emit(
            render_table(
                ["kind", "polarization", "mean-field", "settle time"],
                [[str(report.kind), report.polarization, prediction.polarization, report.settle_time]],
            )
        )
        return ExitCode.success

    def sbm_check(self, args: argparse.Namespace) -> ExitCode:
        cfg = self.model_from(args)
        if (args.edges is None) != (args.labels is None):
            raise ArgParserFailure("sbm check", "--edges and --labels must be given together")
        if args.edges is not None:
            graph = load_labeled_graph(args.edges, args.labels, cfg.normalization, cfg.a)
        else:
            graph = generate_sbm(cfg, args.trial)
        result = concentration_check(graph, cfg, args.delta).to_json()
        result["union_bound"] = concentration_bound_union(cfg.n, cfg.p, cfg.q, args.delta)
        self.emit_json(result)
        return ExitCode.success
