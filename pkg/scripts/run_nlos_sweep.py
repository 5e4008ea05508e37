#!/usr/bin/env python3
"""NLOS sweep (no direct link, 96 first-stage pilots, 16 steady-state):
all four schemes over the default SNR grid."""

import argparse
import time

from risim.config import nlos_default
from risim.harness import run_monte_carlo, write_results


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--frames", type=int, default=200)
    ap.add_argument("--out", default="results/nlos")
    ap.add_argument("--seed", type=int, default=None)
    args = ap.parse_args()

    cfg = nlos_default()
    if args.seed is not None:
        cfg = cfg.replace(rng_seed=args.seed)
    t0 = time.perf_counter()
    rows = run_monte_carlo(cfg, frames=args.frames, progress=print)
    path = write_results(rows, args.out, cfg, wall_time=time.perf_counter() - t0)
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
