"""Randomly pivoted partial Cholesky and Nyström-approximation access.

The factor ``F`` returned here satisfies ``A<S> = F F^T`` where ``A<S>`` is the
column Nyström approximation anchored at the pivot set ``S``.  Pivot order is
the storage order of ``S`` and of the columns of ``F``, which makes ``F[S, :]``
lower triangular by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._linalg import psd_pinv
from .matrix_core import MatrixSource, TriangularFactor


@dataclass(frozen=True)
class NystromApproximation:
    """Pivot set, Cholesky-style factor, and residual diagonal of ``A - F F^T``."""

    pivots: np.ndarray
    factor: np.ndarray
    residual_diag: np.ndarray
    early_stopped: bool = False

    def __post_init__(self):
        object.__setattr__(self, "pivots", np.asarray(self.pivots, dtype=np.intp))
        object.__setattr__(self, "factor", np.asarray(self.factor, dtype=np.float64))
        object.__setattr__(self, "residual_diag", np.asarray(self.residual_diag, dtype=np.float64))

    @property
    def dim(self) -> int:
        return self.factor.shape[0]

    @property
    def rank(self) -> int:
        return self.factor.shape[1]

    @property
    def residual_trace(self) -> float:
        return float(self.residual_diag.sum())

    def pivot_factor(self) -> TriangularFactor:
        """The lower-triangular block ``F[S, :]`` in pivot order."""
        return TriangularFactor(self.factor[self.pivots, :], lower=True)


def _pivoted_cholesky_loop(src: MatrixSource, d: int, next_pivot) -> NystromApproximation:
    """Shared factor-building loop; ``next_pivot(g, t)`` supplies each pivot.

    Maintains the residual diagonal ``g`` (clamped at zero each step) and
    fetches exactly one column of ``A`` per accepted pivot.
    """
    n = src.dim
    g = src.diagonal().astype(np.float64, copy=True)
    if np.any(g < 0):
        raise ValueError("matrix diagonal must be nonnegative")
    if not np.any(g > 0):
        raise ValueError("matrix has an all-zero diagonal")
    # Residual trace at round-off scale counts as underflowed to zero.
    exhausted = g.sum() * n * np.finfo(np.float64).eps
    factor = np.zeros((n, d))
    pivots = np.empty(d, dtype=np.intp)
    t = 0
    while t < d:
        if g.sum() <= exhausted:
            break
        s = next_pivot(g, t)
        if s is None:
            break
        col = src.column(s)
        if np.any(np.isnan(col)):
            raise ValueError(f"NaN encountered in column {s}")
        col -= factor[:, :t] @ factor[s, :t]
        if col[s] <= 0.0:
            # Residual at the proposed pivot is numerically exhausted.
            g[s] = 0.0
            continue
        col[pivots[:t]] = 0.0  # exact zeros keep F[S, :] triangular
        factor[:, t] = col / np.sqrt(col[s])
        pivots[t] = s
        g -= factor[:, t] ** 2
        np.maximum(g, 0.0, out=g)
        g[pivots[: t + 1]] = 0.0
        t += 1
    return NystromApproximation(
        pivots=pivots[:t].copy(),
        factor=factor[:, :t].copy(),
        residual_diag=g,
        early_stopped=t < d,
    )


def rpcholesky(src: MatrixSource, d: int, rng: np.random.Generator) -> NystromApproximation:
    """Randomly pivoted partial Cholesky with adaptive diagonal sampling.

    Each pivot is drawn proportionally to the current residual diagonal; the
    factor column is the fetched matrix column with prior contributions
    subtracted, scaled by the root of the pivot's residual entry.  Stops early
    (returning the achieved rank) if the residual trace underflows to zero.

    Args:
        src: Symmetric psd matrix oracle.
        d: Requested approximation rank, ``1 <= d <= src.dim``.
        rng: Source of pivot randomness.
    """
    n = src.dim
    if not 1 <= d <= n:
        raise ValueError(f"rank must satisfy 1 <= d <= {n}, got {d}")

    def next_pivot(g, t):
        total = g.sum()
        if total <= 0.0:
            return None
        return int(rng.choice(n, p=np.maximum(g, 0.0) / total))

    return _pivoted_cholesky_loop(src, d, next_pivot)


def pivoted_cholesky(src: MatrixSource, pivots) -> NystromApproximation:
    """Partial Cholesky factor with a prescribed pivot sequence.

    Used by tests and cross-module oracles that need a Nyström approximation
    anchored at a chosen pivot set.
    """
    pivots = np.asarray(pivots, dtype=np.intp)
    if len(np.unique(pivots)) != len(pivots):
        raise ValueError("pivots must be distinct")

    def next_pivot(g, t):
        s = int(pivots[t])
        if g[s] <= 0.0:
            raise ValueError(f"prescribed pivot {s} has zero residual diagonal")
        return s

    approx = _pivoted_cholesky_loop(src, len(pivots), next_pivot)
    if approx.rank != len(pivots):
        raise ValueError("prescribed pivot sequence exhausted the residual early")
    return approx


def empty_approximation(src: MatrixSource) -> NystromApproximation:
    """Rank-0 approximation: no pivots, residual diagonal equals ``diag(A)``."""
    g = np.maximum(src.diagonal().astype(np.float64, copy=True), 0.0)
    return NystromApproximation(
        pivots=np.empty(0, dtype=np.intp),
        factor=np.zeros((src.dim, 0)),
        residual_diag=g,
    )


def best_of_t(src: MatrixSource, d: int, t: int, rng: np.random.Generator) -> NystromApproximation:
    """Best of ``t`` independent randomized factorizations by residual trace.

    Each run uses an independent substream spawned from ``rng`` so results are
    identical whether the runs execute serially or concurrently.  Ties break
    toward the lowest run index.
    """
    if t < 1:
        raise ValueError("number of runs must be at least 1")
    best = None
    for child in rng.spawn(t):
        candidate = rpcholesky(src, d, child)
        if best is None or candidate.residual_trace < best.residual_trace:
            best = candidate
    return best


def residual_block(approx: NystromApproximation, src: MatrixSource, block) -> np.ndarray:
    """Principal submatrix ``(A - F F^T)[J, J]`` for ``J`` disjoint from the pivots.

    The result is symmetrized after computation; rows and columns of pivots are
    identically zero in the residual, so pivot indices are rejected.
    """
    block = np.asarray(block, dtype=np.intp)
    if len(np.unique(block)) != len(block):
        raise ValueError("block indices must be distinct")
    if np.isin(block, approx.pivots).any():
        raise ValueError("block must not intersect the pivot set")
    cols = src.columns(block)
    m = cols[block, :] - approx.factor[block, :] @ approx.factor[block, :].T
    return (m + m.T) / 2.0


def dense_nystrom(a: np.ndarray, pivots) -> np.ndarray:
    """Reference column Nyström approximation ``A[:, S] pinv(A[S, S]) A[S, :]``.

    Test-scale oracle; the pseudoinverse uses an eigendecomposition with
    relative cutoff ``1e-12``.
    """
    a = np.asarray(a, dtype=np.float64)
    pivots = np.asarray(pivots, dtype=np.intp)
    if pivots.size == 0:
        return np.zeros_like(a)
    core = psd_pinv(a[np.ix_(pivots, pivots)])
    return a[:, pivots] @ core @ a[pivots, :]


def save_approximation(approx: NystromApproximation, path) -> None:
    """Persist an approximation as an ``.npz`` bundle for reuse across runs."""
    np.savez(
        path,
        pivots=approx.pivots,
        factor=approx.factor,
        residual_diag=approx.residual_diag,
        early_stopped=np.asarray(approx.early_stopped),
    )


def load_approximation(path) -> NystromApproximation:
    """Load an approximation saved by :func:`save_approximation`."""
    with np.load(path) as data:
        return NystromApproximation(
            pivots=data["pivots"],
            factor=data["factor"],
            residual_diag=data["residual_diag"],
            early_stopped=bool(data["early_stopped"]),
        )
