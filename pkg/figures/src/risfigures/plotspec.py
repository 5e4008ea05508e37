"""Plot specification and result-table loading.

The input is the simulator's results CSV: one row per (scheme, snr_db,
frame_index) carrying metric means and half-widths. This module never runs
simulations; it only reads the persisted table.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

# documented schema of the simulator's results file
CSV_COLUMNS = (
    "scheme", "snr_db", "frame_index", "trials",
    "idd_iters_used", "refine_iters_used",
    "nmse_direct", "nmse_cascade", "ber", "fer",
    "spectral_efficiency", "pilot_symbols_spent",
    "nmse_direct_hw", "nmse_cascade_hw", "ber_hw", "fer_hw",
)

NUMERIC_COLUMNS = tuple(c for c in CSV_COLUMNS if c != "scheme")


class SchemaError(ValueError):
    """Input file does not match the documented results schema."""


@dataclass
class PlotSpec:
    input_csv: str
    schemes: list
    x_column: str = "snr_db"
    y_column: str = "nmse_cascade"
    log_y: bool = False
    output: str = "plot.png"
    title: str = ""

    def __post_init__(self):
        if not self.schemes:
            raise ValueError("at least one scheme must be selected")
        for col in (self.x_column, self.y_column):
            if col not in NUMERIC_COLUMNS:
                raise SchemaError(f"unknown column '{col}'; expected one of "
                                  f"{', '.join(NUMERIC_COLUMNS)}")


def load_results(path: str) -> list[dict]:
    """Parse the results CSV into typed row dicts; schema is enforced."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"results file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != CSV_COLUMNS:
            raise SchemaError(
                f"unexpected header in {path}: {reader.fieldnames}")
        rows = []
        for raw in reader:
            row = {"scheme": raw["scheme"]}
            for col in NUMERIC_COLUMNS:
                row[col] = float(raw[col])
            rows.append(row)
    return rows


def curve_points(rows: list[dict], scheme: str, x_column: str,
                 y_column: str) -> tuple[list, list]:
    """Trial-weighted means of y per x value for one scheme, sorted by x."""
    acc: dict[float, list] = {}
    for row in rows:
        if row["scheme"] != scheme:
            continue
        acc.setdefault(row[x_column], []).append((row[y_column], row["trials"]))
    xs = sorted(acc)
    ys = []
    for x in xs:
        num = sum(v * w for v, w in acc[x])
        den = sum(w for _, w in acc[x])
        ys.append(num / den if den else float("nan"))
    return xs, ys
