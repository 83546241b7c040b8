"""Command-line entry point: ``hpsearch run | report | list-targets``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, parse_config
from .engine import AllTrialsFailed, EngineError, run_experiment
from .report import FIGURE_KINDS, ReportError, render_experiment
from .store import StoreError, best_trial, load_experiment
from .targets import BUILTINS

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_ALL_FAILED = 2

log = logging.getLogger("hpsearch")


def _format_best(rec) -> str:
    params = " ".join(f"{k}={v!r}" for k, v in rec.values.items())
    return f"best: set {rec.set_index} result={rec.result!r} {params}"


def cmd_run(args: argparse.Namespace) -> int:
    try:
        config = parse_config(args.config)
        config = config.with_overrides(workers=args.workers, seed=args.seed, repetitions=args.repetitions)
        if args.workers is not None and config.backend == "serial" and args.workers > 1:
            config = config.with_overrides(backend="pool")
        output = args.output or config.output or str(Path("runs") / Path(args.config).stem)
        config = config.with_overrides(output=output)
        config.build_plan()
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR

    try:
        summary = run_experiment(config, directory=output, overwrite=args.force)
    except AllTrialsFailed as exc:
        print(f"error: {exc}; see {Path(output) / 'trials.csv'}", file=sys.stderr)
        return EXIT_ALL_FAILED
    except (EngineError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(f"{summary.total} trials ({summary.failed} failed) in {summary.duration_s:.2f}s -> {output}")
    print(_format_best(summary.best))
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    directory = Path(args.directory)
    try:
        figures = render_experiment(directory, args.fig, args.x, args.y, grid_n=args.grid)
        exp = load_experiment(directory)
    except (StoreError, ReportError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if not exp.completed:
        print(f"warning: {directory} is a partial experiment (no completion marker)", file=sys.stderr)
    for fig in figures:
        print(f"wrote {directory / 'figures' / (fig.name + '.svg')}")
    try:
        best = best_trial(exp.records)
    except StoreError:
        print("no successful trials")
        return EXIT_OK
    width = max(len("result"), *(len(n) for n in exp.space.names))
    print(f"\nbest set: {best.set_index}")
    for name in exp.space.names:
        print(f"  {name:<{width}}  {best.values[name]!r}  ({best.provenance[name]})")
    print(f"  {'result':<{width}}  {best.result!r}")
    return EXIT_OK


def cmd_list_targets(args: argparse.Namespace) -> int:
    for name in BUILTINS:
        print(name)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    # exit status 2 is reserved for "all trials failed"
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hpsearch", description="Parallel hyperparameter search.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (-vv for debug)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run an experiment from a TOML config")
    run.add_argument("-c", "--config", required=True, help="TOML config, or an experiment.json to replay")
    run.add_argument("--workers", type=int, help="override the worker count")
    run.add_argument("--seed", type=int, help="override the seed")
    run.add_argument("--repetitions", type=int, help="override the repetitions per set")
    run.add_argument("-o", "--output", help="output directory (default: config 'output' or runs/<config name>)")
    run.add_argument("--force", action="store_true", help="replace an existing experiment in the output directory")
    run.set_defaults(func=cmd_run)

    rep = sub.add_parser("report", help="regenerate figures from an experiment directory")
    rep.add_argument("directory")
    rep.add_argument("--fig", action="append", choices=FIGURE_KINDS, help="figure kind (repeatable; default all)")
    rep.add_argument("--x", help="x parameter for scatter and contour")
    rep.add_argument("--y", help="y parameter for scatter and contour")
    rep.add_argument("--grid", type=int, default=40, help="contour grid size (default 40)")
    rep.set_defaults(func=cmd_report)

    lst = sub.add_parser("list-targets", help="list the built-in objectives")
    lst.set_defaults(func=cmd_list_targets)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
