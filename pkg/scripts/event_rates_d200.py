#!/usr/bin/env python3
"""Event and norm statistics at (d, m) = (200, 1000) over many seeds.

Prints one CSV row per seed (norm certificates, event flags, probe
maxima) followed by aggregate rates.  This is the measurement behind the
operator-norm and cover-event checks; expect roughly half a second per
seed single-threaded.
"""

import argparse
import sys

from ellipsoid_lab.cli import main as cli_main


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, default=50)
    parser.add_argument("--master-seed", type=int, default=0)
    parser.add_argument("--n-u", type=int, default=100,
                        help="random probe directions per seed")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    args = parser.parse_args(argv)

    return cli_main([
        "diagnose", "--d", "200", "--m", "1000",
        "--seeds", str(args.seeds), "--master-seed", str(args.master_seed),
        "--n-u", str(args.n_u), "--format", args.format,
    ])


if __name__ == "__main__":
    sys.exit(main())
