#!/usr/bin/env python3
"""
ReplayLab CLI
Run weighted-replay experiments from config files and reproduce the bundled studies.

    replaylab run --config fig1 --out results/ --seeds 0..3 --jobs 4
    replaylab repro fig1
    replaylab validate --config my_experiment.cfg
    replaylab recurrence --config cycle_recurrence

Exit codes: 0 ok, 2 configuration error, 3 runtime error.
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

from rich import box
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_RUNTIME_ERROR = 3

REPRO_CHOICES = ("fig1", "gridworld-tce", "noise", "h-correlation", "h-variance")

console = Console()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="replaylab",
        description="Weighted experience replay on tabular MDPs",
    )
    parser.add_argument("--log-level", default=None, help="Log level of the file sink (default from settings)")
    sub = parser.add_subparsers(dest="command", required=True)

    run_cmd = sub.add_parser("run", help="Run a config over its seeds and write metrics CSV")
    run_cmd.add_argument("--config", required=True, help="Config file, or the name of a bundled config")
    run_cmd.add_argument("--out", default=None, help="Output directory (default: output.dir of the config)")
    run_cmd.add_argument("--seeds", default=None, help="Seeds overriding the config, e.g. 0..9 or 1,3,5")
    run_cmd.add_argument("--jobs", type=int, default=1, help="Worker threads")

    repro_cmd = sub.add_parser("repro", help="Run a bundled reproduction recipe")
    repro_cmd.add_argument("recipe", choices=REPRO_CHOICES)
    repro_cmd.add_argument("--out", default=None, help="Output directory (default: results dir)")
    repro_cmd.add_argument("--jobs", type=int, default=1, help="Worker threads")

    validate_cmd = sub.add_parser("validate", help="Parse a config and echo it fully resolved")
    validate_cmd.add_argument("--config", required=True)

    recurrence_cmd = sub.add_parser("recurrence", help="Recurring probability of the policies a run visits")
    recurrence_cmd.add_argument("--config", required=True)
    recurrence_cmd.add_argument("--out", default=None, help="Also write the table as CSV into this directory")

    return parser


def _run(args: argparse.Namespace) -> int:
    from src.harness import ConfigError, load_config, parse_seed_list, run

    config = load_config(args.config)
    try:
        seeds = parse_seed_list(args.seeds) if args.seeds else None
    except ValueError as e:
        raise ConfigError(f"--seeds: {e}", source="command line") from e
    result = run(config, out_dir=Path(args.out) if args.out else None, jobs=args.jobs, seeds=seeds)

    table = Table(title=f"{config.config_id}", box=box.ROUNDED)
    table.add_column("Seed", style="cyan")
    table.add_column("Records", justify="right")
    table.add_column("Final regret", justify="right")
    table.add_column("Final |Q-Q*|inf", justify="right")
    for seed_run in result.runs:
        last = seed_run.rows[-1]
        table.add_row(str(seed_run.seed), str(len(seed_run.rows)), f"{last.regret:.6g}", f"{last.q_gap_linf:.6g}")
    console.print(table)
    console.print(Panel(
        f"[green]CSV:[/green] {result.csv_path}\n[green]Manifest:[/green] {result.manifest_path}",
        title="[OK] Run finished",
        border_style="green",
    ))
    return EXIT_OK


def _repro(args: argparse.Namespace) -> int:
    from src.harness import REPRO_RECIPES

    result = REPRO_RECIPES[args.recipe](out_dir=Path(args.out) if args.out else None, jobs=args.jobs)

    table = Table(title=f"Reproduction: {result.name}", box=box.ROUNDED)
    table.add_column("Check", style="cyan")
    table.add_column("Status", justify="center")
    table.add_column("Numbers")
    styles = {True: "[green]PASS[/green]", False: "[red]FAIL[/red]", None: "[yellow]INFO[/yellow]"}
    for verdict in result.verdicts:
        table.add_row(verdict.name, styles[verdict.passed], verdict.detail)
    console.print(table)
    console.print(f"Summary written to {result.summary_path}")
    return EXIT_OK


def _validate(args: argparse.Namespace) -> int:
    from src.harness import load_config

    config = load_config(args.config)
    console.print(Panel(config.echo().rstrip(), title=f"[OK] {config.config_id}", border_style="green"))
    return EXIT_OK


def _recurrence(args: argparse.Namespace) -> int:
    from src.harness import estimate_recurrence, load_config, write_recurrence_csv

    config = load_config(args.config)
    rows = estimate_recurrence(config)

    table = Table(title=f"Recurring probability: {config.config_id}", box=box.ROUNDED)
    table.add_column("Checkpoint", justify="right")
    table.add_column("Policy", style="cyan")
    table.add_column("epsilon", justify="right")
    for row in rows:
        table.add_row(str(row.checkpoint), row.policy, f"{row.epsilon:.6g}")
    console.print(table)
    if args.out:
        path = write_recurrence_csv(rows, Path(args.out) / f"{config.config_id}.recurrence.csv")
        console.print(f"Table written to {path}")
    return EXIT_OK


COMMANDS = {
    "run": _run,
    "repro": _repro,
    "validate": _validate,
    "recurrence": _recurrence,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI entry point"""
    args = build_parser().parse_args(argv)

    # Lazy import - keeps --help fast
    from loguru import logger
    from src.config import setup_directories, setup_logging
    from src.harness import ConfigError, ExperimentRuntimeError

    setup_directories()
    setup_logging(args.log_level)

    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        console.print(Panel(str(e), title="[ERROR] Configuration", border_style="red"))
        return EXIT_CONFIG_ERROR
    except ExperimentRuntimeError as e:
        logger.exception(f"Experiment failed: {e}")
        console.print(Panel(str(e), title="[ERROR] Runtime", border_style="red"))
        return EXIT_RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
