"""Command-line entry point: run sweeps, calibrate, validate, and grid-sweep
config keys."""

from __future__ import annotations

import argparse
import itertools
import os
import sys
import time

from .config import SystemConfig
from .harness import (calibrate, run_monte_carlo, write_calibration,
                      write_results)
from .link import SCHEMES
from .validate import run_all


def _load_config(path: str | None) -> SystemConfig:
    if path is None:
        return SystemConfig()
    if not os.path.exists(path):
        raise SystemExit(f"config file not found: {path}")
    return SystemConfig.load(path)


def _cmd_run(args) -> int:
    config = _load_config(args.config)
    if args.seed is not None:
        config = config.replace(rng_seed=args.seed)
    schemes = tuple(args.schemes.split(",")) if args.schemes else SCHEMES
    t0 = time.perf_counter()
    rows = run_monte_carlo(config, schemes=schemes, frames=args.frames,
                           progress=print if args.verbose else None)
    path = write_results(rows, args.out, config,
                         wall_time=time.perf_counter() - t0)
    print(f"wrote {path} ({len(rows)} rows)")
    return 0


def _cmd_calibrate(args) -> int:
    config = _load_config(args.config)
    table = calibrate(config, frames=args.frames)
    path = write_calibration(table, args.out, config)
    for row in table:
        print(f"snr {row['snr_db']:6.1f} dB   coarse {row['nmse_coarse']:.4g}   "
              f"refined {row['sigma_est_sq']:.4g}")
    print(f"wrote {path}")
    return 0


def _cmd_validate(args) -> int:
    config = _load_config(args.config)
    results = run_all(config)
    failed = 0
    for name, ok, detail in results:
        status = "PASS" if ok else "FAIL"
        line = f"[{status}] {name}"
        if detail:
            line += f": {detail}"
        print(line)
        failed += not ok
    return 1 if failed else 0


def _cmd_sweep(args) -> int:
    config = _load_config(args.config)
    keys, grids = [], []
    for spec in args.set:
        key, _, values = spec.partition("=")
        if not values:
            raise SystemExit(f"malformed --set '{spec}' (expected key=v1,v2,...)")
        keys.append(key.strip())
        grids.append(values.split(","))
    schemes = tuple(args.schemes.split(",")) if args.schemes else SCHEMES
    for combo in itertools.product(*grids):
        changes = {}
        for key, raw in zip(keys, combo):
            current = getattr(config, key)
            changes[key] = type(current)(raw) if not isinstance(current, tuple) \
                else tuple(float(v) for v in raw.split("/"))
        cfg = config.replace(**changes)
        tag = "_".join(f"{k}-{v}" for k, v in changes.items())
        out_dir = os.path.join(args.out, tag)
        t0 = time.perf_counter()
        rows = run_monte_carlo(cfg, schemes=schemes, frames=args.frames)
        write_results(rows, out_dir, cfg, wall_time=time.perf_counter() - t0)
        print(f"{tag}: {len(rows)} rows")
    return 0


def _cmd_show_config(args) -> int:
    print(_load_config(args.config).to_text(), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="risim",
        description="Multi-RIS MIMO link simulator with iterative "
                    "detection, decoding and channel estimation")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="Monte Carlo sweep, writes results.csv")
    run_p.add_argument("--config", help="config file (key = value sections)")
    run_p.add_argument("--out", default="results", help="output directory")
    run_p.add_argument("--seed", type=int, help="master seed override")
    run_p.add_argument("--schemes", help="comma-separated scheme filter "
                                         f"(subset of {','.join(SCHEMES)})")
    run_p.add_argument("--frames", type=int, help="frames per (scheme, SNR) point")
    run_p.add_argument("--verbose", action="store_true")
    run_p.set_defaults(fn=_cmd_run)

    cal_p = sub.add_parser("calibrate", help="coarse/refined NMSE table per SNR")
    cal_p.add_argument("--config")
    cal_p.add_argument("--out", default="results")
    cal_p.add_argument("--frames", type=int, default=200)
    cal_p.set_defaults(fn=_cmd_calibrate)

    val_p = sub.add_parser("validate", help="run the invariant self-checks")
    val_p.add_argument("--config")
    val_p.set_defaults(fn=_cmd_validate)

    sweep_p = sub.add_parser("sweep", help="grid over named config keys")
    sweep_p.add_argument("--config")
    sweep_p.add_argument("--out", default="results")
    sweep_p.add_argument("--set", action="append", default=[],
                         metavar="KEY=V1,V2", required=True)
    sweep_p.add_argument("--schemes")
    sweep_p.add_argument("--frames", type=int)
    sweep_p.set_defaults(fn=_cmd_sweep)

    show_p = sub.add_parser("show-config", help="print the effective config")
    show_p.add_argument("--config")
    show_p.set_defaults(fn=_cmd_show_config)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
