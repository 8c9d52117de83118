#!/usr/bin/env python3
"""Accuracy versus sampling density, written to sweep.csv.

Thin wrapper over `scdisasm sweep`; the interesting knobs (sweep_points,
noise_sigma, n_per_class) live in the config file.
"""
import argparse
import sys

from scdisasm.cli import main as cli


def run(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=None)
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--out-dir", default=None)
    args = ap.parse_args(argv)

    argv_out = ["--verbose"]
    if args.config:
        argv_out += ["--config", args.config]
    if args.seed is not None:
        argv_out += ["--seed", str(args.seed)]
    if args.out_dir:
        argv_out += ["--out-dir", args.out_dir]
    return cli(argv_out + ["sweep"])


if __name__ == "__main__":
    sys.exit(run())
