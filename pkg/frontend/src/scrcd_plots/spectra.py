"""Eigenvalue-spectrum panels with per-series condition numbers.

Each matrix label in the spectrum CSV becomes one descending log-scale curve,
annotated with the condition number sum(eig) / min positive eig recomputed
from the file contents.
"""

from __future__ import annotations

import argparse

import numpy as np
from matplotlib.figure import Figure

from .io import read_spectrum

_POSITIVE_CUTOFF = 1e-12  # relative to the top eigenvalue


def condition_number(eigenvalues) -> float:
    """sum(eig) / smallest positive eig, the quantity quoted in the legend."""
    values = np.asarray(eigenvalues, dtype=float)
    top = values.max()
    positive = values[values > _POSITIVE_CUTOFF * max(top, 0.0)]
    if positive.size == 0:
        raise ValueError("series has no positive eigenvalues")
    return float(values.sum() / positive.min())


def plot_spectra(spectrum_csv, out_path=None):
    """Render every series of a spectrum CSV; returns the figure."""
    series = read_spectrum(spectrum_csv)
    fig = Figure(figsize=(6.0, 4.2))
    ax = fig.add_subplot(111)
    for label, values in series.items():
        cond = condition_number(values)
        floor = values.max() * 1e-20
        ax.plot(np.arange(1, values.size + 1), np.maximum(values, floor),
                label=f"{label} [{cond:.3g}]")
    ax.set_yscale("log")
    ax.set_xlabel("index")
    ax.set_ylabel("eigenvalue")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    if out_path is not None:
        fig.savefig(out_path, dpi=150)
    return fig


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Plot eigenvalue spectra")
    parser.add_argument("spectrum", help="spectrum CSV file")
    parser.add_argument("--out", required=True, help="output image path")
    args = parser.parse_args(argv)
    plot_spectra(args.spectrum, out_path=args.out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
