#!/usr/bin/env python3
"""Simulate templates, train, and evaluate in one shot.

Equivalent to `scdisasm simulate && scdisasm train && scdisasm evaluate`
with a shared config. Set `mode = realtime-emu` in the config's
[pipeline] section to exercise the quantized deployment instead of the
float one.
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

    base = ["--verbose"]
    if args.config:
        base += ["--config", args.config]
    if args.seed is not None:
        base += ["--seed", str(args.seed)]
    if args.out_dir:
        base += ["--out-dir", args.out_dir]

    for cmd in ("simulate", "train", "evaluate"):
        rc = cli(base + [cmd])
        if rc:
            return rc
    return 0


if __name__ == "__main__":
    sys.exit(run())
