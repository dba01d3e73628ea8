from __future__ import annotations

import argparse
import logging

from .abc import CommandMixin
from .constants import ExitCode, ExperimentName, Normalization
from .converters import EnumAction, positive_float

log = logging.getLogger("echochamber")

FIXED_GRAPH_EXPERIMENTS = (
    ExperimentName.polarization,
    ExperimentName.monotonicity,
    ExperimentName.consensus_prob,
    ExperimentName.extremism,
)


class GraphCommands(CommandMixin):
    """This class will handle experiments on a fixed labeled graph read from disk."""

    def add_graph_parser(self, subparsers):
        parser = subparsers.add_parser("graph", help="Experiments on a fixed labeled graph.")
        commands = parser.add_subparsers(dest="subcommand", metavar="{simulate}")
        commands.required = True

        simulate_parser = commands.add_parser(
            "simulate",
            help="Redraw initial opinions on a fixed graph and run a study.",
            description="Only initial opinions are redrawn per trial; the graph is read once.",
        )
        simulate_parser.add_argument("edges", help="Whitespace separated edge list, one 'u v' pair per line.")
        simulate_parser.add_argument("labels", help="One 'node_id L|R' pair per line.")
        simulate_parser.add_argument(
            "--experiment",
            type=ExperimentName,
            action=EnumAction,
            choices=tuple(str(i) for i in FIXED_GRAPH_EXPERIMENTS),
            default=ExperimentName.extremism,
            help="Which study to run (default extremism).",
        )
        simulate_parser.add_argument(
            "--normalization",
            type=Normalization,
            action=EnumAction,
            default=Normalization.row_normalized,
            help="Edge weighting (default row-normalized).",
        )
        simulate_parser.add_argument("--a", type=positive_float, default=1.0, help="Influence budget a.")
        self.add_run_args(simulate_parser)
        simulate_parser.set_defaults(handler=self.graph_simulate)

    def graph_simulate(self, args: argparse.Namespace) -> ExitCode:
        overrides = self.overrides_from(args)
        overrides["graph"] = {
            "edges": args.edges,
            "labels": args.labels,
            "normalization": str(args.normalization),
            "a": args.a,
        }
        return self.run_configured_experiment(args, overrides, f"graph simulate {args.experiment}")
