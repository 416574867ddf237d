"""``lab`` command line: run scenarios and suites, describe the registries.

Exit codes: 0 success, 1 a bound check or oracle comparison failed, 2 bad input.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import __version__
from .errors import LabError
from .scenario import EXIT_INPUT, SUITES, ScenarioReport, describe, dumps, load_scenario, rows_to_csv, run, run_suite


def _emit(report: ScenarioReport, out: Path | None, csv_path: Path | None) -> int:
    text = dumps(report.to_dict())
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8")
    if csv_path is not None:
        csv_path.write_text(rows_to_csv(report.rows), encoding="utf-8")
    for f in report.failures:
        print(f"check failed: {f}", file=sys.stderr)
    return report.exit_code


def _add_output_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", type=Path, default=None, help="write the JSON report here instead of stdout")
    p.add_argument("--csv", type=Path, default=None, help="also write a flat CSV table")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--samples", type=int, default=None, help="override params.samples")
    p.add_argument("--timing", action="store_true", help="include wall time (reports stop being byte-identical)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lab", description="Local convexity laboratory")
    parser.add_argument("--version", action="version", version=f"lab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run_cmd = sub.add_parser("run", help="run a scenario file")
    run_cmd.add_argument("scenario", type=str)
    _add_output_args(run_cmd)

    suite_cmd = sub.add_parser("suite", help="run a named suite")
    suite_cmd.add_argument("name", type=str, help=f"one of {', '.join(SUITES)}")
    _add_output_args(suite_cmd)

    desc = sub.add_parser("describe", help="list spaces, map families or tasks")
    desc.add_argument("what", choices=["spaces", "maps", "tasks"])
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 for --help/--version
        return int(exc.code or 0)
    try:
        if args.command == "describe":
            sys.stdout.write(json.dumps(describe(args.what), indent=2, sort_keys=True) + "\n")
            return 0
        if args.samples is not None and args.samples < 1:
            raise LabError("samples: must be a positive integer")
        if args.seed is not None and args.seed < 0:
            raise LabError("seed: must be a nonnegative integer")
        if args.command == "run":
            sc = load_scenario(args.scenario, args.seed, args.samples)
            report = run(sc, timing=args.timing)
        else:
            if args.name not in SUITES:
                raise LabError(f"suite: unknown suite {args.name!r}; expected one of {', '.join(SUITES)}")
            t0 = time.perf_counter()
            report = run_suite(args.name, args.seed or 0, args.samples)
            if args.timing:
                report.wall_time = time.perf_counter() - t0
        return _emit(report, args.out, args.csv)
    except LabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    raise SystemExit(main())
