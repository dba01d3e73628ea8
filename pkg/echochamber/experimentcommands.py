from __future__ import annotations

import argparse
import logging
from typing import Any, Dict

from .abc import CommandMixin
from .config import load_config, resolve_config
from .constants import ExitCode, ExperimentName
from .converters import EnumAction, float_list, positive_float, positive_int
from .experiments import ExperimentConfig, run_experiment, write_experiment
from .helpers import dumps

log = logging.getLogger("echochamber")

# runs with a lower share of successful trials exit with ExitCode.trial_failures
MIN_SUCCESS_RATIO = 0.99


class ExperimentCommands(CommandMixin):
    """This class will handle the Monte Carlo experiments."""

    def add_experiment_parser(self, subparsers):
        parser = subparsers.add_parser(
            "experiment",
            help="Run one of the Monte Carlo studies and write CSV plus a JSON manifest.",
            description="Run one of the Monte Carlo studies. Values resolve as defaults < --config file < flags.",
        )
        parser.add_argument(
            "experiment",
            type=ExperimentName,
            action=EnumAction,
            help="Which study to run.",
        )
        self.add_run_args(parser)
        parser.set_defaults(handler=self.experiment_run)

    @staticmethod
    def add_run_args(parser):
        parser.add_argument("--config", default=None, help="TOML file with [network], [integrator] and run keys.")
        parser.add_argument("--trials", type=positive_int, default=None, help="Trials per grid point.")
        parser.add_argument("--seed", type=int, default=None, help="Experiment seed.")
        parser.add_argument("--workers", type=positive_int, default=None, help="Worker processes (default 1).")
        parser.add_argument("--chunk-size", type=positive_int, default=None, help="Trials integrated per batch.")
        parser.add_argument("--b", type=positive_float, default=None, help="Platform influence for single-b studies.")
        parser.add_argument("--b-grid", type=float_list, default=None, help="Comma separated platform influences.")
        parser.add_argument("--h-grid", type=float_list, default=None, help="Comma separated initial half-widths.")

    @staticmethod
    def overrides_from(args: argparse.Namespace) -> Dict[str, Any]:
        overrides = {
            "trials": args.trials,
            "seed": args.seed,
            "workers": args.workers,
            "chunk_size": args.chunk_size,
            "b_grid": args.b_grid,
            "h_grid": args.h_grid,
        }
        if args.b is not None:
            overrides["b"] = args.b
            overrides["b_grid"] = args.b_grid or [args.b]
        return overrides

    def experiment_run(self, args: argparse.Namespace) -> ExitCode:
        return self.run_configured_experiment(args, self.overrides_from(args), f"experiment {args.experiment}")

    def run_configured_experiment(self, args: argparse.Namespace, overrides: Dict[str, Any], command: str) -> ExitCode:
        name: ExperimentName = args.experiment
        file_data = load_config(args.config) if args.config else {}
        resolved = resolve_config(name, file_data, overrides)
        cfg = ExperimentConfig.from_resolved(name, resolved)
        manifest = self.new_manifest(args, resolved, seed=cfg.seed)
        manifest.command = command
        output = run_experiment(cfg)
        write_experiment(output, manifest, self.output_directory(), self.run_stamp())

        if name is ExperimentName.cycle_demo:
            self.emit(dumps(output.notes))
        else:
            self.emit(output.table())
        if output.failed:
            log.warning("%d of %d trials failed.", output.failed, output.trials)
        if output.success_ratio < MIN_SUCCESS_RATIO:
            log.error(
                "Only %.1f%% of trials succeeded, below the %.0f%% required.",
                100 * output.success_ratio,
                100 * MIN_SUCCESS_RATIO,
            )
            return ExitCode.trial_failures
        return ExitCode.success
