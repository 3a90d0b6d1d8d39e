"""Command-line entry point: run scenarios, list the bundled catalog, and
report on result directories."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import report, scenarios
from .scenario_io import ScenarioParseError
from .simulator import run_scenario


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fogsim",
        description="Edge-cluster orchestration simulator and experiment runner")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a bundled scenario or a scenario file")
    run_p.add_argument("scenario", help="bundled scenario name or path to an .ini file")
    run_p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    run_p.add_argument("--reps", type=int, default=None, help="override repetitions")
    run_p.add_argument("--out", default="results", help="output directory")
    run_p.add_argument("--profile", choices=("paper", "ci"), default="paper")
    run_p.add_argument("--jobs", type=int, default=1,
                       help="parallel repetitions (default 1)")

    sub.add_parser("list", help="list the bundled scenarios")

    report_p = sub.add_parser("report", help="recompute comparison tables from CSVs")
    report_p.add_argument("directory", help="directory holding the result CSVs")
    return parser


def cmd_run(args) -> int:
    try:
        config = scenarios.resolve(args.scenario)
    except (ScenarioParseError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        results = run_scenario(config, seed=args.seed, repetitions=args.reps,
                               profile=args.profile, jobs=args.jobs)
        written = report.write_results(results, args.out)
    except Exception as exc:  # noqa: BLE001 - report any runtime failure as exit 1
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


def cmd_list() -> int:
    for name, description in scenarios.list_scenarios():
        print(f"{name:20s} {description}")
    return 0


def cmd_report(args) -> int:
    try:
        rows = report.load_results(Path(args.directory))
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(report.render_comparison(rows), end="")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "run":
        return cmd_run(args)
    if args.command == "list":
        return cmd_list()
    if args.command == "report":
        return cmd_report(args)
    parser.print_usage(sys.stderr)
    return 2


if __name__ == "__main__":
    sys.exit(main())
