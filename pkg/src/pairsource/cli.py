"""Command-line entry point.

Subcommands:
  run     single experiment; writes timeseries.csv and summary.csv
  sweep   parameter grid; writes sweep.csv
  check   analytic self-test suite; prints one PASS/FAIL line per check

Exit codes: 0 success, 1 configuration error, 2 runtime or numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from . import runner
from .config import ConfigError, load_config


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="path to the experiment config file")
    sub.add_argument("--out", default="out", help="output directory (default: out)")
    sub.add_argument("--seed", type=int, help="override the master seed (u64)")
    sub.add_argument("--traj", type=int, help="override the trajectory count")
    sub.add_argument("--workers", type=int, help="override the worker count")
    sub.add_argument("--svg", action="store_true", help="also render an SVG plot")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pairsource",
        description="Cavity-QED source of polarization-entangled photon pairs.")
    subs = parser.add_subparsers(dest="command", required=True)
    for name, descr in (("run", "run a single experiment"),
                        ("sweep", "run a parameter sweep"),
                        ("check", "run the analytic self-test suite")):
        _add_common(subs.add_parser(name, help=descr))
    return parser


def _load(args) -> "ExperimentConfig":
    if args.config is None:
        raise ConfigError("--config is required for this command")
    cfg = load_config(args.config)
    overrides = {}
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            raise ConfigError("--seed must fit in an unsigned 64-bit integer")
        overrides["seed"] = args.seed
    if args.traj is not None:
        if args.traj < 1:
            raise ConfigError("--traj must be at least 1")
        overrides["n_traj"] = args.traj
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigError("--workers must be at least 1")
        overrides["workers"] = args.workers
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


def _cmd_run(args) -> int:
    result = runner.run_experiment(_load(args), args.out, svg=args.svg)
    summary = result["summary"]
    for key in runner.SUMMARY_COLUMNS:
        print(f"{key} = {runner.format_value(summary[key])}")
    for kind, path in result["paths"].items():
        print(f"wrote {kind}: {path}")
    return 0


def _cmd_sweep(args) -> int:
    result = runner.run_sweep(_load(args), args.out, svg=args.svg)
    print(f"wrote sweep: {result['paths']['sweep']} ({result['rows']} rows)")
    if "svg" in result["paths"]:
        print(f"wrote svg: {result['paths']['svg']}")
    return 0


def _cmd_check(args) -> int:
    failures = 0
    for name, ok, detail in runner.self_check():
        if ok:
            print(f"PASS {name}")
        else:
            failures += 1
            print(f"FAIL {name}" + (f" ({detail})" if detail else ""))
    return 0 if failures == 0 else 2


_COMMANDS = {"run": _cmd_run, "sweep": _cmd_sweep, "check": _cmd_check}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
