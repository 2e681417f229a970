"""Command-line entry point: ``a2sbnn run`` and ``a2sbnn validate``.

Exit codes: 0 success, 1 configuration or I/O error, 2 numeric failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from .errors import ConfigError, NumericError
from .experiment import ExperimentConfig, run_sweep

log = logging.getLogger("a2sbnn")


def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="a2sbnn", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the theta sweep")
    run.add_argument("--config", help="JSON config file (defaults used when omitted)")
    th = run.add_mutually_exclusive_group()
    th.add_argument("--theta", type=float, help="single theta value")
    th.add_argument("--theta-grid", type=_floats, help="comma-separated theta values")
    run.add_argument("--seed", type=int, help="single seed (replaces the seed list)")
    run.add_argument("--grid-size", type=int)
    run.add_argument("--iterations", type=int)
    run.add_argument("--out", help="output directory")
    run.add_argument("--workers", type=int)
    plots = run.add_mutually_exclusive_group()
    plots.add_argument("--emit-plots", dest="emit_plots", action="store_true", default=None)
    plots.add_argument("--no-plots", dest="emit_plots", action="store_false")

    val = sub.add_parser("validate", help="check a config file against the schema")
    val.add_argument("--config", required=True)
    return p


def config_from_args(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if args.theta is not None:
        cfg.theta_grid = [args.theta]
    if args.theta_grid is not None:
        cfg.theta_grid = args.theta_grid
    if args.seed is not None:
        cfg.seeds = [args.seed]
    if args.grid_size is not None:
        cfg.grid_size = args.grid_size
    if args.iterations is not None:
        if args.iterations < 1:
            raise ConfigError("--iterations must be >= 1")
        cfg.calibration = replace(cfg.calibration, iterations=args.iterations)
    if args.out is not None:
        cfg.output_dir = args.out
    if args.workers is not None:
        cfg.workers = max(1, args.workers)
    if args.emit_plots is not None:
        cfg.emit_plots = args.emit_plots
    # round-trip through the schema so flag overrides are validated too
    return ExperimentConfig.from_dict(cfg.to_dict())


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        if args.command == "validate":
            ExperimentConfig.load(args.config)
            print(f"{args.config}: ok")
            return 0
        cfg = config_from_args(args)
        run_sweep(cfg)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 1
    except (NumericError, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
