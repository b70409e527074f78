"""Kernel ridge regression driver: ingestion, standardization, solve dispatch.

The regression system is ``(K + lam * I) x = y`` with a Gaussian kernel over
the (by default standardized) feature table.  The kernel matrix is never
materialized; solvers pull column blocks on demand.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from . import baselines, solver
from .matrix_core import gaussian_kernel_source
from .nystrom import rpcholesky
from .solver import SolveOptions
from .trace import ConvergenceTrace

KRR_METHODS = ("scrcd", "rcd", "cg", "pcg")


@dataclass(frozen=True)
class Dataset:
    """Feature table with regression targets and ingestion provenance."""

    features: np.ndarray
    targets: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        targets = np.asarray(self.targets, dtype=np.float64)
        if features.ndim != 2 or targets.ndim != 1 or features.shape[0] != targets.shape[0]:
            raise ValueError("features must be (m, p) with matching length-m targets")
        if features.shape[0] < 2:
            raise ValueError("need at least two rows")
        if not (np.all(np.isfinite(features)) and np.all(np.isfinite(targets))):
            raise ValueError("NaN or Inf in dataset")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "targets", targets)

    @property
    def size(self) -> int:
        return self.features.shape[0]


def load_table(path, target_column: str, max_rows: int | None = None, seed: int = 0) -> Dataset:
    """Load a CSV with a header row into features and a named target column.

    All cells must be numeric; a non-numeric cell aborts with its row and
    column.  If the file holds more than ``max_rows`` rows, a seeded uniform
    subsample without replacement is taken (and recorded in the provenance).
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path} is empty")
        header = [name.strip() for name in header]
        if target_column not in header:
            raise ValueError(f"target column {target_column!r} not found in {path}")
        target_idx = header.index(target_column)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            parsed = []
            for col_idx, cell in enumerate(row):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise ValueError(
                        f"non-numeric cell at row {lineno}, column {header[col_idx]!r}"
                    ) from None
            rows.append(parsed)
    if not rows:
        raise ValueError(f"no data rows in {path}")
    table = np.asarray(rows, dtype=np.float64)
    total_rows = table.shape[0]
    selected = np.arange(total_rows)
    if max_rows is not None and max_rows < total_rows:
        rng = np.random.default_rng(seed)
        selected = np.sort(rng.choice(total_rows, size=max_rows, replace=False))
        table = table[selected]
    feature_cols = [i for i in range(len(header)) if i != target_idx]
    return Dataset(
        features=table[:, feature_cols],
        targets=table[:, target_idx],
        provenance={
            "path": str(path),
            "file_rows": int(total_rows),
            "rows": int(table.shape[0]),
            "subsample_seed": int(seed),
            "target": target_column,
            "feature_columns": [header[i] for i in feature_cols],
        },
    )


def standardize(ds: Dataset) -> Dataset:
    """Per-feature zero mean and unit variance; constant features stay centered.

    Targets are left untouched.
    """
    centered = ds.features - ds.features.mean(axis=0)
    std = centered.std(axis=0)
    scale = np.where(std > 0, std, 1.0)
    return Dataset(
        features=centered / scale,
        targets=ds.targets,
        provenance={**ds.provenance, "standardized": True},
    )


def krr_solve(
    ds: Dataset,
    sigma: float,
    lam: float,
    method: str,
    d: int,
    options: SolveOptions,
    standardize_features: bool = True,
    clock=time.monotonic,
) -> tuple[np.ndarray, ConvergenceTrace]:
    """Solve the kernel system with the chosen method and return its trace.

    ``scrcd`` and ``pcg`` first run the randomized pivoted factorization with
    rank ``d`` on a substream of ``options.seed`` (for ``pcg`` the factor
    approximates the kernel without its ridge, matching the preconditioner
    ``F F^T + lam I``).
    """
    if method not in KRR_METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {KRR_METHODS}")
    if lam < 0 or (method == "pcg" and lam <= 0):
        raise ValueError("ridge must be positive for pcg and nonnegative otherwise")
    if standardize_features:
        ds = standardize(ds)
    system = gaussian_kernel_source(ds.features, sigma, ridge=lam)
    y = ds.targets
    pivot_rng = np.random.default_rng(options.seed).spawn(1)[0]
    if method == "scrcd":
        approx = rpcholesky(system, d, pivot_rng)
        x, trace = solver.solve(system, approx, y, options, clock=clock)
    elif method == "rcd":
        x, trace = baselines.block_rcd_solve(system, y, options, clock=clock)
    elif method == "cg":
        x, trace = baselines.cg_solve(system, y, options, clock=clock)
    else:  # pcg
        kernel_only = gaussian_kernel_source(ds.features, sigma, ridge=0.0)
        approx = rpcholesky(kernel_only, d, pivot_rng)
        x, trace = baselines.nystrom_pcg_solve(system, y, approx, lam, options, clock=clock)
    trace.extras["method"] = method
    trace.extras["sigma"] = float(sigma)
    trace.extras["lam"] = float(lam)
    trace.extras["rank"] = int(d)
    return x, trace
