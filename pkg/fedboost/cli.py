"""Command-line interface.

Subcommands:

* ``run``: simulate a config or preset against the synchronous baseline and
  write traces and the comparison report;
* ``preset-list``: show the named presets;
* ``validate``: parse a config and print it with every default filled in.

Exit codes: 0 success, 1 config or usage error, 2 runtime error, 3 non-convergence
under ``--require-convergence``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import List, Optional, Sequence, Union

import yaml

from .exceptions import ConfigError, FedBoostError, NonConvergenceError
from .experiment import parse_seeds, run_single, run_sweep
from .metrics import format_report
from .models.config_model import ExperimentConfig, Mode, describe_config_keys
from .presets import PRESETS, preset, preset_names
from .utils.config_loader import parse_config, validate_config
from .utils.logger import LOGGER, configure_logging, log_and_raise_error

OUTPUT_ENV = "FEDBOOST_OUT"
DEFAULT_OUTPUT = "results"


def _config_epilog() -> str:
    lines = ["config keys (YAML sections, with defaults):"]
    lines.extend(f"  {key} = {default}" for key, default in describe_config_keys())
    return "\n".join(lines)


class ArgumentParser(argparse.ArgumentParser):
    """Usage errors are config errors."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(ConfigError.exit_code, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = ArgumentParser(
        prog="fedboost",
        description="Asynchronous federated AdaBoost simulator.",
        epilog=_config_epilog(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--log-level", default="INFO", help="structlog level name (default: INFO)")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser(
        "run",
        help="simulate and compare against the synchronous baseline",
        epilog=_config_epilog(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    source = run.add_mutually_exclusive_group()
    source.add_argument("--config", type=Path, help="YAML experiment config")
    source.add_argument("--preset", help=f"preset name or 'all' ({', '.join(PRESETS)})")
    run.add_argument("--seed", type=int, help="seed for data, partition and client resources")
    run.add_argument("--seeds", help="multi-seed sweep, e.g. 1..5 or 1,2,5")
    run.add_argument(
        "--out",
        type=Path,
        default=Path(os.environ.get(OUTPUT_ENV, DEFAULT_OUTPUT)),
        help=f"output directory (default: ${OUTPUT_ENV} or {DEFAULT_OUTPUT})",
    )
    run.add_argument("--mode", choices=[mode.value for mode in Mode], help="override the candidate mode")
    run.add_argument("--require-convergence", action="store_true", help="exit 3 if any run does not converge")
    run.add_argument("--workers", type=int, default=1, help="parallel processes for sweeps (default: 1)")

    commands.add_parser("preset-list", help="list the named presets")

    validate = commands.add_parser("validate", help="parse a config and print it with defaults")
    validate_source = validate.add_mutually_exclusive_group(required=True)
    validate_source.add_argument("--config", type=Path)
    validate_source.add_argument("--preset")
    return parser


def _load_configs(config_path: Optional[Path], preset_name: Optional[str]) -> List[ExperimentConfig]:
    if preset_name == "all":
        return [preset(name) for name in preset_names()]
    if preset_name:
        return [preset(preset_name)]
    if config_path:
        return [parse_config(config_path)]
    return [validate_config({}, source="default config")]


def run_experiment(
    config: ExperimentConfig, output_dir: Union[str, Path], require_convergence: bool = False
) -> int:
    """
    Run one experiment, write its results and print the report.

    Args:
        config: validated config; its mode is the candidate.
        output_dir: result directory.
        require_convergence: treat a non-converged run as a failure.

    Returns:
        The process exit status.
    """
    try:
        result = run_single(config, output_dir)
        if result.report is not None:
            print(format_report(result.report))
        else:
            print(f"synchronous baseline: converged_at={result.baseline.converged_at}")
        if require_convergence and not result.converged:
            log_and_raise_error(f"Run {config.name} did not converge.", NonConvergenceError)
    except FedBoostError as e:
        return e.exit_code
    return 0


def _run(args: argparse.Namespace) -> int:
    configs = _load_configs(args.config, args.preset)
    if args.mode:
        configs = [config.with_mode(Mode(args.mode)) for config in configs]
    if args.seeds and args.seed is not None:
        log_and_raise_error("Use either --seed or --seeds, not both.", ConfigError)

    if args.seeds or len(configs) > 1:
        seeds = parse_seeds(args.seeds) if args.seeds else [args.seed if args.seed is not None else configs[0].dataset.seed]
        sweep = run_sweep(configs, seeds, args.out, workers=args.workers)
        if sweep.summary is not None:
            print(sweep.summary.to_string(index=False, float_format=lambda v: f"{v:.4f}"))
        if args.require_convergence and not sweep.converged:
            log_and_raise_error("At least one sweep run did not converge.", NonConvergenceError)
        return 0

    config = configs[0] if args.seed is None else configs[0].with_seed(args.seed)
    return run_experiment(config, args.out, args.require_convergence)


def _preset_list() -> int:
    for name in preset_names():
        heterogeneity = preset(name).heterogeneity
        print(
            f"{name:<12} clients={preset(name).partition.clients:<3} "
            f"compute={list(heterogeneity.compute_time)} link={list(heterogeneity.link_latency)} "
            f"dropout={list(heterogeneity.dropout)}"
        )
    return 0


def _validate(args: argparse.Namespace) -> int:
    (config,) = _load_configs(args.config, args.preset)
    print(yaml.safe_dump(json.loads(config.json(by_alias=True)), sort_keys=False), end="")
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        configure_logging(args.log_level)
    except ValueError as e:
        LOGGER.error(str(e))
        return ConfigError.exit_code
    try:
        if args.command == "run":
            return _run(args)
        if args.command == "preset-list":
            return _preset_list()
        return _validate(args)
    except FedBoostError as e:
        return e.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
