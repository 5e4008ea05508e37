#!/usr/bin/env python3
"""LOS sweep over the default SNR grid: all four schemes, CSV output.

Desk-scale defaults reproduce the qualitative curves; raise --frames for
smoother statistics.
"""

import argparse
import time

from risim.config import los_default
from risim.harness import run_monte_carlo, write_results


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--frames", type=int, default=200)
    ap.add_argument("--out", default="results/los")
    ap.add_argument("--seed", type=int, default=None)
    args = ap.parse_args()

    cfg = los_default()
    if args.seed is not None:
        cfg = cfg.replace(rng_seed=args.seed)
    t0 = time.perf_counter()
    rows = run_monte_carlo(cfg, frames=args.frames, progress=print)
    path = write_results(rows, args.out, cfg, wall_time=time.perf_counter() - t0)
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
