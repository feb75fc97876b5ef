"""Command-line wrapper: forcekf-report --results <dir> --dataset <dir>
--out <dir> --format svg|png."""

from __future__ import annotations

import argparse
import sys

from .render import ReportError, ReportSpec, render_report


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="forcekf-report",
        description="Render estimator result figures from CSV outputs",
    )
    parser.add_argument("--results", required=True, help="directory with estimate.csv")
    parser.add_argument("--dataset", default=None,
                        help="dataset directory (groundtruth.csv is optional)")
    parser.add_argument("--out", required=True, help="output directory for figures")
    parser.add_argument("--format", default="svg", choices=["svg", "png"])
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    spec = ReportSpec(args.results, args.dataset, args.out, args.format)
    try:
        for path in render_report(spec):
            print(path)
    except ReportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
