"""Command line for figure regeneration from result CSVs."""

from __future__ import annotations

import argparse
import sys

from .plotspec import PlotSpec, SchemaError
from .render import render


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="risfigures",
        description="Render NMSE/BER/SE curves from a simulator results CSV")
    p.add_argument("--csv", required=True, help="input results.csv")
    p.add_argument("--schemes", required=True,
                   help="comma-separated scheme filter")
    p.add_argument("--x", default="snr_db", help="x column (default snr_db)")
    p.add_argument("--y", default="nmse_cascade",
                   help="y column (default nmse_cascade)")
    p.add_argument("--logy", action="store_true", help="logarithmic y axis")
    p.add_argument("--out", required=True, help="output image path")
    p.add_argument("--title", default="", help="optional plot title")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    schemes = [s for s in args.schemes.split(",") if s]
    try:
        spec = PlotSpec(input_csv=args.csv, schemes=schemes, x_column=args.x,
                        y_column=args.y, log_y=args.logy, output=args.out,
                        title=args.title)
        path = render(spec)
    except (FileNotFoundError, SchemaError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
