"""Convergence-curve rendering: relative residual vs. epoch or time.

Traces sharing a label are treated as seeds of one configuration and drawn as
a median line with a 0.2/0.8-quantile band; a label with a single trace is a
plain line. The y axis is always logarithmic.
"""

from __future__ import annotations

import argparse

import numpy as np
from matplotlib.figure import Figure

from .io import default_label, read_trace

_FLOOR = 1e-300  # keeps exact zeros drawable on the log axis


def _group_by_label(paths, labels):
    if labels is None:
        labels = [default_label(p) for p in paths]
    if len(labels) != len(paths):
        raise ValueError(f"got {len(paths)} paths but {len(labels)} labels")
    groups: dict[str, list] = {}
    for path, label in zip(paths, labels):
        groups.setdefault(label, []).append(read_trace(path))
    return groups


def _curve(trace, x_axis):
    x = trace["epoch"] if x_axis == "epoch" else trace["elapsed_seconds"]
    y = np.maximum(trace["rel_residual"], _FLOOR)
    return x, y


def _median_band(curves):
    """Median and 0.2/0.8 quantiles of log-residuals on a common grid.

    Runs that stop early (converged) are extended with their final value.
    """
    grid = np.unique(np.concatenate([x for x, _ in curves]))
    stack = np.empty((len(curves), grid.size))
    for i, (x, y) in enumerate(curves):
        logy = np.log10(y)
        stack[i] = np.interp(grid, x, logy, left=logy[0], right=logy[-1])
    median = 10 ** np.median(stack, axis=0)
    lo = 10 ** np.quantile(stack, 0.2, axis=0)
    hi = 10 ** np.quantile(stack, 0.8, axis=0)
    return grid, median, lo, hi


def plot_traces(trace_csv_paths, labels=None, out_path=None, x_axis="epoch"):
    """Render convergence curves; returns the figure (saved when ``out_path``).

    Args:
        trace_csv_paths: Trace CSV files in the documented schema.
        labels: Optional per-path labels; paths sharing a label are drawn as a
            median line with a 0.2/0.8-quantile band. Defaults to file stems.
        out_path: Image file to write (format from the extension).
        x_axis: ``"epoch"`` or ``"time"``.
    """
    if x_axis not in ("epoch", "time"):
        raise ValueError(f"x_axis must be 'epoch' or 'time', got {x_axis!r}")
    if not trace_csv_paths:
        raise ValueError("no trace files given")
    groups = _group_by_label(list(trace_csv_paths), labels)

    fig = Figure(figsize=(6.0, 4.2))
    ax = fig.add_subplot(111)
    for label, traces in groups.items():
        curves = [_curve(t, x_axis) for t in traces]
        if len(curves) == 1:
            ax.plot(*curves[0], label=label)
        else:
            grid, median, lo, hi = _median_band(curves)
            (line,) = ax.plot(grid, median, label=label)
            ax.fill_between(grid, lo, hi, color=line.get_color(), alpha=0.25, linewidth=0)
    ax.set_yscale("log")
    ax.set_xlabel("epochs" if x_axis == "epoch" else "seconds")
    ax.set_ylabel("relative residual")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    if out_path is not None:
        fig.savefig(out_path, dpi=150)
    return fig


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Plot solver convergence traces")
    parser.add_argument("traces", nargs="+", help="trace CSV files")
    parser.add_argument("--labels", help="comma-separated labels, one per file")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--x-axis", choices=("epoch", "time"), default="epoch")
    args = parser.parse_args(argv)
    labels = args.labels.split(",") if args.labels else None
    plot_traces(args.traces, labels=labels, out_path=args.out, x_axis=args.x_axis)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
