"""Two-panel benchmark figure: convergence curves beside annotated spectra."""

from __future__ import annotations

import argparse

import numpy as np
from matplotlib.figure import Figure

from .io import read_spectrum
from .spectra import condition_number
from .traces import _curve, _group_by_label, _median_band


def two_panel(trace_csv_paths, spectrum_csv, labels=None, out_path=None, x_axis="epoch"):
    """Convergence panel (left) and eigenvalue panel (right) in one image."""
    if x_axis not in ("epoch", "time"):
        raise ValueError(f"x_axis must be 'epoch' or 'time', got {x_axis!r}")
    groups = _group_by_label(list(trace_csv_paths), labels)
    series = read_spectrum(spectrum_csv)

    fig = Figure(figsize=(11.0, 4.2))
    left, right = fig.subplots(1, 2)
    for label, traces in groups.items():
        curves = [_curve(t, x_axis) for t in traces]
        if len(curves) == 1:
            left.plot(*curves[0], label=label)
        else:
            grid, median, lo, hi = _median_band(curves)
            (line,) = left.plot(grid, median, label=label)
            left.fill_between(grid, lo, hi, color=line.get_color(), alpha=0.25, linewidth=0)
    left.set_yscale("log")
    left.set_xlabel("epochs" if x_axis == "epoch" else "seconds")
    left.set_ylabel("relative residual")
    left.legend()
    left.grid(True, which="both", alpha=0.3)

    for label, values in series.items():
        floor = values.max() * 1e-20
        right.plot(np.arange(1, values.size + 1), np.maximum(values, floor),
                   label=f"{label} [{condition_number(values):.3g}]")
    right.set_yscale("log")
    right.set_xlabel("index")
    right.set_ylabel("eigenvalue")
    right.legend()
    right.grid(True, which="both", alpha=0.3)

    fig.tight_layout()
    if out_path is not None:
        fig.savefig(out_path, dpi=150)
    return fig


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Two-panel convergence + spectrum figure")
    parser.add_argument("traces", nargs="+", help="trace CSV files")
    parser.add_argument("--spectrum", required=True, help="spectrum CSV file")
    parser.add_argument("--labels", help="comma-separated labels, one per trace file")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--x-axis", choices=("epoch", "time"), default="epoch")
    args = parser.parse_args(argv)
    labels = args.labels.split(",") if args.labels else None
    two_panel(args.traces, args.spectrum, labels=labels, out_path=args.out, x_axis=args.x_axis)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
