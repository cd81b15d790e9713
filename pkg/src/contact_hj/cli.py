"""CLI for contact-hj."""

import argparse
import sys
from importlib.metadata import version
from pathlib import Path
from typing import Any

from rich.console import Console
from rich.table import Table

from . import config as cfg
from . import logging_setup
from .errors import ConfigError
from .file_io import atomic_write
from .runner import EXIT_CONFIG, FAILED, PASSED, SKIPPED, RunReport, run
from .systems import available_systems

console = Console(stderr=True)

FAMILIES = available_systems()
_STATUS_STYLE = {PASSED: "green", FAILED: "red", SKIPPED: "dim"}


def _tolerance_overrides(pairs: list[str]) -> dict[str, float]:
    out: dict[str, float] = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep:
            raise ConfigError("tolerances", f"override {pair!r} is not KEY=VALUE")
        try:
            out[key.strip()] = float(value)
        except ValueError as exc:
            raise ConfigError(f"tolerances.{key.strip()}", f"must be a number, got {value!r}") from exc
    return out


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    out: dict[str, Any] = {}
    if args.task:
        out["tasks"] = {"run": list(dict.fromkeys(args.task))}
    if args.out:
        out.setdefault("output", {})["dir"] = args.out
    if args.format:
        out.setdefault("output", {})["format"] = args.format
    if args.seed is not None:
        out["seed"] = args.seed
    if args.tolerance:
        out["tolerances"] = _tolerance_overrides(args.tolerance)
    if args.debug:
        out["debug"] = True
    return out


def _summary(report: RunReport) -> Table:
    table = Table(title=f"contact-hj run: {report.family}")
    table.add_column("Task")
    table.add_column("Status")
    table.add_column("Worst residual", justify="right")
    table.add_column("Time", justify="right")
    table.add_column("Notes")
    for task in report.tasks:
        style = _STATUS_STYLE.get(task.status, "yellow")
        worst = task.worst_residual
        notes = task.message or "; ".join(task.failures) or ", ".join(Path(f).name for f in task.files)
        table.add_row(
            task.name,
            f"[{style}]{task.status}[/{style}]",
            "-" if worst is None else f"{worst:.3e}",
            f"{task.elapsed:.2f}s",
            notes,
        )
    return table


def cmd_run(args: argparse.Namespace) -> int:
    logging_setup.configure(None, debug=args.debug)
    try:
        config = cfg.load_config(Path(args.config), _overrides(args))
    except ConfigError as exc:
        console.print(f"[red]Configuration error:[/red] {exc}")
        return EXIT_CONFIG
    logging_setup.configure(config.out_dir / "contact-hj.log", debug=config.debug, reconfigure=True)

    with console.status(f"Running {', '.join(config.tasks)} for {config.family.name}..."):
        report = run(config)
    console.print(_summary(report))
    console.print(f"Report: {config.out_dir / 'report.json'}")
    return report.exit_code


def cmd_init(args: argparse.Namespace) -> int:
    path = Path(args.path) if args.path else Path(f"{args.family}.toml")
    if path.exists() and not args.force:
        console.print(f"[red]{path} exists.[/red] Use --force to overwrite.")
        return 1
    try:
        data = cfg.demo_config(args.family)
    except ConfigError as exc:
        console.print(f"[red]{exc}[/red]")
        return EXIT_CONFIG
    atomic_write(path, cfg.dump_toml(data))
    console.print(f"[green]Wrote[/green] {path}")
    return 0


def main() -> None:
    parser = argparse.ArgumentParser(
        prog="contact-hj",
        description="Hamilton-Jacobi theory for contact Hamiltonian systems: checks, reconstruction and integration",
    )
    sub = parser.add_subparsers(dest="command")

    p_run = sub.add_parser("run", help="Run the tasks of a configuration file")
    p_run.add_argument("config", help="Path to a TOML run configuration")
    p_run.add_argument("--task", action="append", choices=cfg.TASKS, help="Task to run (repeatable; replaces [tasks] run)")
    p_run.add_argument("--out", help="Output directory")
    p_run.add_argument("--format", choices=cfg.FORMATS, help="Trajectory file format")
    p_run.add_argument("--seed", type=int, help="Seed for sampled grids")
    p_run.add_argument("--tolerance", action="append", metavar="KEY=VALUE", help="Override a tolerance (repeatable)")
    p_run.add_argument("--debug", action="store_true", help="Log at DEBUG level")

    p_init = sub.add_parser("init", help="Write a demo configuration for a built-in family")
    p_init.add_argument("family", choices=FAMILIES)
    p_init.add_argument("--path", help="Destination file (default: FAMILY.toml)")
    p_init.add_argument("--force", action="store_true", help="Overwrite an existing file")

    sub.add_parser("version", help="Show version")

    args = parser.parse_args()
    if not args.command:
        parser.print_help()
        sys.exit(0)

    commands = {
        "run": cmd_run,
        "init": cmd_init,
        "version": lambda _: console.print(version("contact-hj")) or 0,
    }
    sys.exit(commands[args.command](args))


if __name__ == "__main__":
    main()
