"""Readers for the solver trace and spectrum CSV schemas.

These scripts are pure consumers of the documented artifact formats:
``iteration,epoch,rel_residual,elapsed_seconds`` for traces and
``index,matrix,eigenvalue`` for spectra. They never import the solver
package and never mutate their inputs.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

TRACE_COLUMNS = ("iteration", "epoch", "rel_residual", "elapsed_seconds")
SPECTRUM_COLUMNS = ("index", "matrix", "eigenvalue")


def _check_header(header, expected, path):
    if header is None:
        raise ValueError(f"{path}: empty input, no header row")
    missing = [name for name in expected if name not in header]
    if missing:
        raise ValueError(f"{path}: missing columns {missing}")


def read_trace(path) -> dict[str, np.ndarray]:
    """Read one trace CSV into column arrays; empty bodies are rejected."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        _check_header(header, TRACE_COLUMNS, path)
        idx = {name: header.index(name) for name in TRACE_COLUMNS}
        rows = [row for row in reader if row]
    if not rows:
        raise ValueError(f"{path}: empty input, no checkpoint rows")
    out = {}
    for name in TRACE_COLUMNS:
        out[name] = np.array([float(row[idx[name]]) for row in rows])
    return out


def read_spectrum(path) -> dict[str, np.ndarray]:
    """Read a spectrum CSV into {matrix label: eigenvalues (descending)}."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        _check_header(header, SPECTRUM_COLUMNS, path)
        label_idx = header.index("matrix")
        value_idx = header.index("eigenvalue")
        series: dict[str, list[float]] = {}
        for row in reader:
            if not row:
                continue
            series.setdefault(row[label_idx], []).append(float(row[value_idx]))
    if not series:
        raise ValueError(f"{path}: empty input, no eigenvalue rows")
    return {label: np.sort(np.array(values))[::-1] for label, values in series.items()}


def default_label(path) -> str:
    """Label for a trace file: the stem with a leading ``trace_`` stripped."""
    stem = Path(path).stem
    return stem[6:] if stem.startswith("trace_") else stem
