"""Command-line interface.

Subcommands mirror the pipeline stages (ingest, timesteps, features, train,
evaluate, diagnose, report), plus synthetic-data commands (synth, sweep)
and the convenience umbrella ``run``.  Every subcommand is non-interactive
and runnable standalone on the artifacts of the previous stages.
"""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .runner import (
    ConfigError,
    RunnerError,
    load_config,
    run_pipeline,
    run_stage,
    run_synth,
    run_synth_sweep,
)

STAGE_COMMANDS = ("ingest", "timesteps", "features", "train", "evaluate", "diagnose", "report")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="microevents",
        description="Micro-event detection experiments on time-bucketed forum messages.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", required=True, help="experiment config (JSON)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the master seed")
        p.add_argument(
            "--format",
            default=None,
            help="comma-separated report formats (json,markdown,svg)",
        )
        p.add_argument("--jobs", type=int, default=1, help="parallel workers (sweep cells)")

    for name in STAGE_COMMANDS:
        add_common(sub.add_parser(name, help=f"run the '{name}' stage standalone"))
    add_common(sub.add_parser("run", help="run the full pipeline end to end"))
    add_common(sub.add_parser("synth", help="generate one synthetic dataset instance"))
    add_common(sub.add_parser("sweep", help="run the synthetic detectability sweep"))
    return parser


def _resolve_config(args: argparse.Namespace) -> dict:
    overrides: dict = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.format is not None:
        formats = [f.strip() for f in args.format.split(",") if f.strip()]
        overrides["report"] = {"formats": formats}
    return load_config(args.config, overrides=overrides)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _resolve_config(args)
        if args.command == "run":
            run_pipeline(config, args.out)
        elif args.command == "synth":
            run_synth(config, args.out)
        elif args.command == "sweep":
            run_synth_sweep(config, args.out, n_jobs=max(1, args.jobs))
        else:
            run_stage(args.command, config, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except RunnerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
