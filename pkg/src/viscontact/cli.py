"""Command-line entry point: ``viscontact <subcommand> --config FILE [--out DIR] [--jobs N] [--seed S]``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from . import experiments as ex
from .analysis import FitError, SmallnessError
from .config import ConfigError, load_config
from .dynamics import AdmissibilityError, StepFailure
from .linalg import ConvergenceError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_PRECONDITION = 4

COMMANDS = {
    "simulate": lambda cfg, a: ex.run_simulate(cfg, a.out, a.seed),
    "sweep-kappa": lambda cfg, a: ex.run_sweep_kappa(cfg, a.out, a.jobs, a.seed),
    "refine": lambda cfg, a: ex.run_refinement(cfg, a.out, a.jobs),
    "decay": lambda cfg, a: ex.run_decay(cfg, a.out, a.seed),
    "constants": lambda cfg, a: ex.run_constants(cfg, a.out, a.seed),
    "vi-check": lambda cfg, a: ex.run_vi_check(cfg, a.out, a.jobs),
}


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="viscontact", description="Penalized viscoelastic contact simulator and checks.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="dotted-key config file")
        p.add_argument("--out", help="output directory (default: output.dir from the config)")
        p.add_argument("--jobs", type=_positive, default=1, help="concurrent sweep members")
        p.add_argument("--seed", type=_seed, default=None, help="seed for the eigensolver start vectors")
        p.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        args.out = args.out or cfg.out
        COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SmallnessError, AdmissibilityError) as exc:
        print(f"precondition failed: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except StepFailure as exc:
        where = "" if exc.step_index is None else f" (step {exc.step_index})"
        print(f"numerical failure{where}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConvergenceError, FitError, FloatingPointError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"{args.command}: results in {args.out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
