"""Command line entry point: ``exlab run`` and ``exlab sweep``."""

from __future__ import annotations

import argparse
import json
import sys

from .config import schema
from .exceptions import ExlabError, NumericError
from .scenarios import run, sweep

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3


def _parser():
    parser = argparse.ArgumentParser(prog="exlab", description="Encoder extraction and defense experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", help="YAML experiment config")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="override the output root directory")

    common(sub.add_parser("run", help="run one scenario"))
    sw = sub.add_parser("sweep", help="run a scenario once per value of a numeric field")
    common(sw)
    sw.add_argument("--axis", required=True, help="dotted field path, e.g. attack.query_budget")
    sw.add_argument("--values", required=True, help="comma-separated values")
    sw.add_argument("--jobs", type=int, default=1, help="parallel runs (default 1)")
    sub.add_parser("schema", help="print the config JSON schema")
    return parser


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        if args.command == "schema":
            print(json.dumps(schema(), indent=2, sort_keys=True))
        elif args.command == "run":
            result = run(args.config, seed=args.seed, out=args.out)
            print(f"{len(result.rows)} rows written to {result.out_dir} in {result.seconds:.1f}s")
        else:
            values = [v.strip() for v in args.values.split(",") if v.strip()]
            merged, results = sweep(args.config, args.axis, values, seed=args.seed, out=args.out, jobs=args.jobs)
            print(f"{len(results)} runs merged into {merged}")
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ExlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
