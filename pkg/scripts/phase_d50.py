#!/usr/bin/env python3
"""Canonical d=50 phase sweep: records, summary, transition, diagram.

Writes phase_records.csv, phase_summary.csv and phase.png into --out-dir
and prints the per-cell success rates with the interpolated transition.
"""

import argparse
import os
import sys

from ellipsoid_lab.cli import main as cli_main


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trials", type=int, default=100,
                        help="Monte Carlo trials per (d, m) cell")
    parser.add_argument("--master-seed", type=int, default=0)
    parser.add_argument("--workers", type=int, default=1,
                        help="worker processes (ELLIPSOID_LAB_THREADS overrides)")
    parser.add_argument("--out-dir", default="phase_d50_out")
    args = parser.parse_args(argv)

    code = cli_main([
        "phase", "--d", "50", "--trials", str(args.trials),
        "--master-seed", str(args.master_seed),
        "--workers", str(args.workers), "--out-dir", args.out_dir,
    ])
    if code != 0:
        return code
    return cli_main([
        "plot", "--summary", os.path.join(args.out_dir, "phase_summary.csv"),
        "--out", os.path.join(args.out_dir, "phase.png"),
    ])


if __name__ == "__main__":
    sys.exit(main())
