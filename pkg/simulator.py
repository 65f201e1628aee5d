"""Command-line front end: run one experiment, sweep override values, or check invariants."""
import argparse
import asyncio
import itertools
import json
import os
import sys

from typing import Dict, List, Sequence, Tuple

from loaders.config_loader import ConfigError, ConfigLoader, ExperimentConfig
from simulation.invariants import CHECKS, run_checks
from simulation.orchestrator import ExperimentResult, run_seeds
from simulation.record_saver import RecordSaver
from utils.clogger import CLogger

DEFAULT_CONFIG = os.path.join(os.path.dirname(os.path.abspath(__file__)), "configs", "blobs_rolling_dfrd.json")

EXIT_OK, EXIT_FAILURE, EXIT_CONFIG = 0, 1, 2

_logger = CLogger.for_component("Simulator")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="simulator.py", description=__doc__)
    commands = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (("run", "run one configuration for every seed"),
                            ("sweep", "run the cross product of comma separated override values")):
        command = commands.add_parser(name, help=help_text)
        command.add_argument("overrides", nargs="*", metavar="key=value",
                             help="config overrides such as distill.alpha=0.5 or gate=triangle")
        command.add_argument("-c", "--config", default=DEFAULT_CONFIG, help="JSON config or run manifest")
        command.add_argument("-o", "--output-dir", default=None, help="directory for every written file")
        command.add_argument("-s", "--seeds", default=None, help="comma separated master seeds, e.g. 0,1,2")

    check = commands.add_parser("check", help="run the fast invariant suite")
    check.add_argument("--only", action="append", choices=list(CHECKS), help="run only the named check")
    return parser


def parse_seeds(text: str) -> List[int]:
    try:
        seeds = [int(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise ConfigError("seeds", f"expected comma separated integers, got {text!r}") from e
    if not seeds:
        raise ConfigError("seeds", "at least one seed is required")
    return seeds


def sweep_entries(overrides: Sequence[str]) -> List[Tuple[str, List[str]]]:
    """
    Expand overrides into sweep entries.

    A value that is not valid JSON and contains commas is an axis (gate=diamond,triangle);
    every other override is shared by all entries. Returns (entry name, overrides) pairs.
    """
    shared, axes = [], []
    for override in overrides:
        if "=" not in override:
            raise ConfigError(override, "overrides must look like section.key=value")
        key, value = override.split("=", 1)
        try:
            json.loads(value)
            is_axis = False
        except json.JSONDecodeError:
            is_axis = "," in value
        if is_axis:
            axes.append((key, [part.strip() for part in value.split(",") if part.strip()]))
        else:
            shared.append(override)

    if not axes:
        return [("base", shared)]
    entries = []
    for combination in itertools.product(*(values for _, values in axes)):
        pairs = [(key, value) for (key, _), value in zip(axes, combination)]
        name = "_".join(f"{key.split('.')[-1]}-{value}" for key, value in pairs)
        entries.append((name, shared + [f"{key}={value}" for key, value in pairs]))
    return entries


def load_experiment(args: argparse.Namespace, overrides: Sequence[str]) -> ExperimentConfig:
    config = ConfigLoader(args.config, overrides).get_experiment()
    if args.output_dir:
        config.output.directory = args.output_dir
    if args.seeds:
        config.seeds = parse_seeds(args.seeds)
    config.validate()
    CLogger.set_global_level(CLogger.parse_level(config.output.log_level))
    return config


async def _execute(entries: List[Tuple[str, ExperimentConfig]], saver: RecordSaver, summary_name: str) -> None:
    results: Dict[str, List[ExperimentResult]] = {}
    summaries = {}
    for name, config in entries:
        _logger.info(f"{name}: {len(config.seeds)} seed(s), {config.federation.rounds} rounds")
        results[name], summaries[name] = run_seeds(config)
        for result in results[name]:
            await saver.save_run(config, result, entry=name)
    path = await saver.save_summary(results, summaries, name=summary_name)
    _logger.info(f"summary written to {path}")


async def run_command(args: argparse.Namespace) -> int:
    config = load_experiment(args, args.overrides)
    saver = RecordSaver(config.output.directory)
    await _execute([(config.output.run_name, config)], saver, f"{config.output.run_name}_summary")
    return EXIT_OK


async def sweep_command(args: argparse.Namespace) -> int:
    # every entry is resolved before the first run starts
    entries = [(name, load_experiment(args, overrides)) for name, overrides in sweep_entries(args.overrides)]
    saver = RecordSaver(entries[0][1].output.directory)
    await _execute(entries, saver, "sweep_summary")
    return EXIT_OK


def check_command(args: argparse.Namespace) -> int:
    outcomes = run_checks(args.only)
    failed = [outcome.name for outcome in outcomes if not outcome.passed]
    if failed:
        _logger.error(f"{len(failed)} of {len(outcomes)} checks failed: {failed}")
        return EXIT_FAILURE
    _logger.info(f"all {len(outcomes)} checks passed")
    return EXIT_OK


def main(argv: Sequence[str] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "check":
            return check_command(args)
        command = run_command if args.command == "run" else sweep_command
        return asyncio.run(command(args))
    except ConfigError as e:
        _logger.error(f"config error: {e}")
        return EXIT_CONFIG
    except FileNotFoundError as e:
        _logger.error(f"config error: {e}")
        return EXIT_CONFIG
    except Exception as e:
        _logger.error(f"{type(e).__name__}: {e}")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
