"""Command-line interface.

Subcommands: ``solve`` (run the configured solver), ``oracle`` (force the
radial reference solver), ``verify`` (solve and print the certificate,
report only), and ``sweep`` (parameter-grid table).  Exit codes: 0
converged and certified, 2 nonexistence suspected, 1 error.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .config import RunConfig, parse_config
from .errors import KfreeError, ParseError, ValidationError
from .runner import EXIT_ERROR, run, sweep


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="TOML or JSON run configuration")
    p.add_argument("--out", default="out", help="output directory (default: ./out)")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--quiet", action="store_true", help="suppress progress output")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="kfree",
        description="Concave constant-curvature surfaces with free boundaries",
    )
    sub = ap.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("solve", "run the solver selected in the config"),
        ("oracle", "run the radial reference solver"),
        ("verify", "solve and print the certification summary"),
        ("sweep", "evaluate a parameter grid into sweep.csv"),
    ):
        p = sub.add_parser(name, help=helptext)
        _add_common(p)
    return ap


def _load(args) -> RunConfig:
    cfg = parse_config(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args)
    except (ParseError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    try:
        if args.command == "sweep":
            sweep(cfg, args.out, quiet=args.quiet)
            return 0
        if args.command == "oracle":
            cfg = dataclasses.replace(cfg, solver="oracle")
        artifacts = args.command != "verify"
        report, code = run(cfg, args.out, quiet=args.quiet, artifacts=artifacts)
        if args.command == "verify" and not args.quiet:
            for cert_name, cert in report.get("certificates", {}).items():
                for check in cert.get("checks", []):
                    mark = "PASS" if check["passed"] else "FAIL"
                    print(
                        f"[{mark}] {cert_name}.{check['name']}: "
                        f"residual {check['residual']:.3e} (tol {check['tolerance']:.1e})"
                    )
        return code
    except KfreeError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
