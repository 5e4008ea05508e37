"""Deterministic curve rendering: fixed styling, fixed DPI, pinned PNG
metadata, so identical inputs produce identical bytes."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .plotspec import PlotSpec, curve_points, load_results

_DPI = 120
_FIGSIZE = (6.0, 4.0)
_MARKERS = ("o", "s", "^", "d", "v", "x")

AXIS_LABELS = {
    "snr_db": "SNR [dB]",
    "nmse_cascade": "cascaded channel NMSE",
    "nmse_direct": "direct channel NMSE",
    "ber": "BER",
    "fer": "FER",
    "spectral_efficiency": "spectral efficiency [bit/s/Hz]",
    "frame_index": "frame index",
    "pilot_symbols_spent": "pilot symbols per frame",
}


def render(spec: PlotSpec) -> str:
    """Draw one curve per selected scheme and write the image file.

    Raises on a missing input file, a schema mismatch, or when the scheme
    filter matches nothing; no file is written in those cases.
    """
    rows = load_results(spec.input_csv)
    curves = {}
    for scheme in spec.schemes:
        xs, ys = curve_points(rows, scheme, spec.x_column, spec.y_column)
        if xs:
            curves[scheme] = (xs, ys)
    if not curves:
        raise ValueError(
            f"scheme filter {spec.schemes} matched no rows in {spec.input_csv}")

    fig, ax = plt.subplots(figsize=_FIGSIZE, dpi=_DPI)
    for i, (scheme, (xs, ys)) in enumerate(sorted(curves.items())):
        ax.plot(xs, ys, marker=_MARKERS[i % len(_MARKERS)], label=scheme)
    if spec.log_y:
        ax.set_yscale("log")
    ax.set_xlabel(AXIS_LABELS.get(spec.x_column, spec.x_column))
    ax.set_ylabel(AXIS_LABELS.get(spec.y_column, spec.y_column))
    if spec.title:
        ax.set_title(spec.title)
    ax.grid(True, which="both", alpha=0.4)
    ax.legend()
    fig.tight_layout()
    fig.savefig(spec.output, dpi=_DPI,
                metadata={"Software": "risfigures"})
    plt.close(fig)
    return spec.output
