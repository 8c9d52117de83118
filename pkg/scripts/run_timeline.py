#!/usr/bin/env python3
"""Six-point reboot/adaptation timeline, optionally over several seeds.

Prints per-seed recognition rates for both modes plus the three
before/after adaptation deltas, and exits nonzero if any seed breaks
the expected ordering (every delta >= 0 and offline final >= real-time
final).
"""
import argparse
import sys

from scdisasm.config import RunConfig, load_config, override
from scdisasm.harness import run_timeline


def run(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=None)
    ap.add_argument("--seeds", type=int, default=1,
                    help="number of consecutive seeds starting at the "
                         "config seed")
    ap.add_argument("--out-dir", default=None)
    args = ap.parse_args(argv)

    cfg = load_config(args.config) if args.config else RunConfig()
    cfg = override(cfg, out_dir=args.out_dir)
    first = cfg.seed
    bad = 0
    for seed in range(first, first + args.seeds):
        rep = run_timeline(override(cfg, seed=seed))
        ok = True
        for mode in ("offline", "realtime"):
            r = rep.mean_rates[mode]
            deltas = [r[i + 1] - r[i] for i in (0, 2, 4)]
            ok &= all(d >= 0 for d in deltas)
            print(f"seed {seed} {mode:8s} "
                  + " ".join(f"{x:.3f}" for x in r)
                  + "  deltas " + " ".join(f"{d:+.3f}" for d in deltas))
        ok &= rep.mean_rates["offline"][-1] >= rep.mean_rates["realtime"][-1]
        if not ok:
            bad += 1
            print(f"seed {seed}: ordering violated", file=sys.stderr)
    print(f"{args.seeds - bad}/{args.seeds} seeds clean")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(run())
