"""Run every CLI subcommand on the reference configuration.

    python3 scripts/run_reference.py [--config configs/reference.cfg] [--out out/reference] [--jobs 4]

Each subcommand writes into its own subdirectory of ``--out``; the exit code
of each run is printed and the script exits with the first nonzero one.
"""

import argparse
import sys
import time
from pathlib import Path

from viscontact import cli

REPO = Path(__file__).resolve().parents[1]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(REPO / "configs" / "reference.cfg"))
    ap.add_argument("--out", default="out/reference")
    ap.add_argument("--jobs", type=int, default=4)
    ap.add_argument("--only", nargs="*", choices=list(cli.COMMANDS), help="subset of subcommands")
    args = ap.parse_args()
    status = 0
    for name in args.only or cli.COMMANDS:
        argv = [name, "--config", args.config, "--out", str(Path(args.out) / name)]
        if name in ("sweep-kappa", "refine", "vi-check"):
            argv += ["--jobs", str(args.jobs)]
        start = time.perf_counter()
        code = cli.main(argv)
        print(f"  exit {code} after {time.perf_counter() - start:.1f} s")
        status = status or code
    return status


if __name__ == "__main__":
    sys.exit(main())
