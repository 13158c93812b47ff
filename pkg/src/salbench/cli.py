"""Command-line interface: generate, evaluate, sanity, report.

Exit codes: 0 success, 2 configuration error, 3 scorer unavailable,
4 run finished but some samples were excluded.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigError, IngestError, SalbenchError, ScorerUnavailableError
from .pipeline import (
    emit_report,
    generate_maps,
    load_config,
    run_pipeline,
    sanity_from_reports,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SCORER = 3
EXIT_PARTIAL = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="salbench",
        description="Benchmark harness for visual-explanation heatmaps",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    generate = sub.add_parser("generate", help="generate RISE/occlusion saliency maps")
    generate.add_argument("--config", required=True, help="run config JSON")
    generate.add_argument("--out", required=True, help="output directory for SMAP files")

    evaluate = sub.add_parser("evaluate", help="run metrics and curves over saved maps")
    evaluate.add_argument("--config", required=True, help="run config JSON")
    evaluate.add_argument("--maps", required=True, help="directory of <image_id>.<method>.smap files")
    evaluate.add_argument("--out", required=True, help="report output directory")

    sanity = sub.add_parser("sanity", help="consistency and inter-method tables from reports")
    sanity.add_argument("--reports", nargs="+", required=True, help="one or more report directories")
    sanity.add_argument("--out", required=True, help="output directory for tables")

    report = sub.add_parser("report", help="emit the aggregate table of a report")
    report.add_argument("--in", dest="in_dir", required=True, help="report directory")
    report.add_argument("--format", choices=("csv", "json"), default="csv")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "generate":
            summary = generate_maps(load_config(args.config), args.out)
        elif args.command == "evaluate":
            summary = run_pipeline(load_config(args.config), args.maps, args.out)
        elif args.command == "sanity":
            summary = sanity_from_reports(args.reports, args.out)
        else:
            sys.stdout.write(emit_report(args.in_dir, args.format))
            return EXIT_OK
    except (ConfigError, IngestError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ScorerUnavailableError as exc:
        print(f"scorer unavailable: {exc}", file=sys.stderr)
        return EXIT_SCORER
    except SalbenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    for key, value in sorted(summary.items()):
        print(f"{key}: {value}")
    if summary.get("n_exclusions"):
        return EXIT_PARTIAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
