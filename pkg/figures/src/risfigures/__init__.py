"""Regenerates NMSE/BER/SE figures from simulator result CSVs."""

from .plotspec import CSV_COLUMNS, PlotSpec, load_results
from .render import render

__version__ = "0.1.0"
