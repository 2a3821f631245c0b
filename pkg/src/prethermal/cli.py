"""Command-line entry point.

    prethermal simulate <scenario> --config <file> [--out <dir>] [--seed <int>]
    prethermal verify <manifest>

Exit status: 0 success, 1 validation error (or failed verification), 2 numerical failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .runner import SCENARIOS, ManifestError, ValidationError, load_config, run, verify

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; here 2 is reserved for numerical failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="prethermal", description="Driven quantum many-body simulations.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    s = sub.add_parser("simulate", help="run a scenario and write CSVs plus manifest.json")
    s.add_argument("scenario", help=f"one of: {', '.join(sorted(SCENARIOS))}")
    s.add_argument("--config", required=True, help="JSON object of namespaced parameters")
    s.add_argument("--out", default=".", help="output directory (default: current)")
    s.add_argument("--seed", type=int, default=0, help="seed for random initial states (default 0)")
    v = sub.add_parser("verify", help="check output files against a manifest")
    v.add_argument("manifest", help="manifest.json or the directory holding it")
    return p


def _simulate(args) -> int:
    try:
        cfg = load_config(args.config)
        manifest = run(args.scenario, cfg, args.out, args.seed)
    except (ValidationError, ValueError, TypeError, KeyError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure in {args.scenario}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for name in manifest["files"]:
        print(name)
    return EXIT_OK


def _verify(args) -> int:
    try:
        ok, problems = verify(args.manifest)
    except ManifestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    for line in problems:
        print(line)
    print("ok" if ok else "verification failed")
    return EXIT_OK if ok else EXIT_VALIDATION


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return _simulate(args) if args.command == "simulate" else _verify(args)


if __name__ == "__main__":
    sys.exit(main())
