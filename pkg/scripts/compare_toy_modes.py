#!/usr/bin/env python3
"""Variance and error comparison of ABF vs PABF on a toy system.

Runs K seeded realizations per mode and writes the comparison table
(time, var_F, var_gradA, err_abf, err_pabf) used for the variance-reduction
and error-decay figures.

Usage: python scripts/compare_toy_modes.py [--config configs/toy_b.cfg]
                                           [--out runs/compare_toy] [-k 8]
"""

import argparse
import sys
from pathlib import Path

from pabf.cli import cmd_compare, parse_config


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default="configs/toy_b.cfg")
    ap.add_argument("--out", default="runs/compare_toy")
    ap.add_argument("-k", "--realizations", type=int, default=8)
    args = ap.parse_args()

    cfg = parse_config(args.config)
    return cmd_compare(cfg, Path(args.out), args.realizations, ["abf", "pabf"])


if __name__ == "__main__":
    sys.exit(main())
