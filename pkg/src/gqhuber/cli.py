"""Command-line entry points: run, validate, chart.

Exit codes: 0 success, 1 validation error (bad config, bad arguments,
unreadable inputs), 2 runtime failure in all arms.
"""

from __future__ import annotations

import argparse
import sys

from .charts import CHART_METRICS, emit_chart
from .experiment import ConfigError, parse_experiment_config, run_experiment
from .records import read_records_csv


class _Parser(argparse.ArgumentParser):
    """Argument errors are validation errors: exit 1, not argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="gqhuber",
        description="Loss-variant comparison experiments for quantile distributional RL.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run every (arm, seed) pair in a config")
    run_p.add_argument("config", help="path to a JSON experiment config")
    run_p.add_argument("--out", default=None, help="output directory (overrides config)")
    run_p.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    run_p.add_argument("--seeds", type=int, default=None, help="number of seeds (overrides config)")

    val_p = sub.add_parser("validate", help="check a config without running it")
    val_p.add_argument("config", help="path to a JSON experiment config")

    chart_p = sub.add_parser("chart", help="render one metric from a records.csv")
    chart_p.add_argument("records", help="path to a records.csv")
    chart_p.add_argument("--metric", required=True, choices=CHART_METRICS)
    chart_p.add_argument("--out", required=True, help="output .svg path")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            config = parse_experiment_config(args.config)
            print(f"config ok: {len(config['arms'])} arms x {config['seeds']} seeds "
                  f"on environment {config['environment']['id']!r}")
            return 0
        if args.command == "run":
            return run_experiment(args.config, workers=args.workers,
                                  out_dir=args.out, seeds=args.seeds)
        records = read_records_csv(args.records)
        emit_chart(records, args.metric, args.out)
        print(f"wrote {args.out}")
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
