"""Column-action least-squares solver on top of randomly pivoted QR.

Solves ``min_x ||A x - b||_2`` by running the constrained coordinate solver on
the normal equations without ever forming ``A^T A``: the column projection
approximation ``A_hat = Q R`` (anchored at pivot columns ``S``) plays the role
of the Nyström approximation, and every iterate keeps the residual orthogonal
to the pivot columns: ``A[:, S]^T (A x - b) = 0``.

Setup cost note: the coupling matrix ``C = (R[:, S])^{-1} Q^T A`` is built
with one dense pass over ``A`` (``O(d m n)`` work); there is no cheaper route
for lazily accessed matrices, so this module targets in-memory ``A``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .matrix_core import TriangularFactor, back_substitution
from .solver import SolveOptions, _inner_solve, sample_block
from .trace import CONVERGED, EPOCH_BUDGET, ConvergenceTrace, TraceRecorder


@dataclass(frozen=True)
class ColumnProjectionApprox:
    """Partial QR of selected columns: ``A_hat = q_factor @ r_factor``.

    ``pivots`` lists the selected column indices in selection order;
    ``r_factor[:, pivots]`` is upper triangular with positive diagonal in that
    order.  ``residual_sq_norms`` holds the squared column norms of
    ``A - A_hat`` (exactly zero on the pivots).
    """

    pivots: np.ndarray
    q_factor: np.ndarray
    r_factor: np.ndarray
    residual_sq_norms: np.ndarray
    early_stopped: bool = False

    def __post_init__(self):
        object.__setattr__(self, "pivots", np.asarray(self.pivots, dtype=np.intp))
        object.__setattr__(self, "q_factor", np.asarray(self.q_factor, dtype=np.float64))
        object.__setattr__(self, "r_factor", np.asarray(self.r_factor, dtype=np.float64))
        object.__setattr__(self, "residual_sq_norms", np.asarray(self.residual_sq_norms, dtype=np.float64))

    @property
    def rank(self) -> int:
        return self.q_factor.shape[1]

    def approx_matrix(self) -> np.ndarray:
        return self.q_factor @ self.r_factor

    def pivot_r_factor(self) -> TriangularFactor:
        return TriangularFactor(self.r_factor[:, self.pivots], lower=False)


def randomly_pivoted_qr(a: np.ndarray, d: int, rng: np.random.Generator) -> ColumnProjectionApprox:
    """Partial QR with column pivots sampled by residual squared norms.

    Each accepted pivot column is orthogonalized against the current basis
    with one reorthogonalization pass; residual norms are downdated by the new
    coefficient row and clamped at zero.  Stops early with the achieved rank
    if the residual norms vanish before ``d`` pivots.
    """
    a = np.asarray(a, dtype=np.float64)
    m, n = a.shape
    if not 1 <= d <= min(m, n):
        raise ValueError(f"rank must satisfy 1 <= d <= {min(m, n)}, got {d}")
    g = np.einsum("ij,ij->j", a, a).astype(np.float64)
    # Residual mass at round-off scale counts as exhausted.
    exhausted = g.sum() * max(m, n) * np.finfo(np.float64).eps
    q_factor = np.zeros((m, d))
    r_factor = np.zeros((d, n))
    pivots = np.empty(d, dtype=np.intp)
    t = 0
    while t < d:
        total = g.sum()
        if total <= exhausted:
            break
        s = int(rng.choice(n, p=g / total))
        col = a[:, s].copy()
        col -= q_factor[:, :t] @ (q_factor[:, :t].T @ col)
        col -= q_factor[:, :t] @ (q_factor[:, :t].T @ col)
        norm = float(np.linalg.norm(col))
        if norm <= 0.0 or norm * norm <= 1e-30 * total:
            g[s] = 0.0
            continue
        q = col / norm
        q_factor[:, t] = q
        row = q @ a
        row[pivots[:t]] = 0.0  # exact zeros keep r_factor[:, S] triangular
        r_factor[t, :] = row
        pivots[t] = s
        g -= row**2
        np.maximum(g, 0.0, out=g)
        g[pivots[: t + 1]] = 0.0
        t += 1
    return ColumnProjectionApprox(
        pivots=pivots[:t].copy(),
        q_factor=q_factor[:, :t].copy(),
        r_factor=r_factor[:t, :].copy(),
        residual_sq_norms=g,
        early_stopped=t < d,
    )


def ls_solve(
    a: np.ndarray,
    b: np.ndarray,
    approx: ColumnProjectionApprox,
    options: SolveOptions,
    clock=time.monotonic,
    on_checkpoint=None,
) -> tuple[np.ndarray, ConvergenceTrace]:
    """Randomized column-block descent toward the least-squares solution.

    Initialization solves the pivot normal equations through the triangular
    ``r_factor``; iterations sample column blocks by residual squared norms,
    solve the small Gram system, and update the pivot coordinates so the
    orthogonality invariant is preserved.  Stops on the relative
    normal-equation residual ``||A^T r|| / ||A^T b||`` (the plain residual
    does not vanish at the optimum).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    m, n = a.shape
    if b.shape != (m,):
        raise ValueError(f"right-hand side must have shape ({m},)")
    options.validate(n, approx.rank)
    pivots = approx.pivots
    r_s = approx.pivot_r_factor()
    # D = (R[:, S])^{-1} Q^T maps observations to pivot coefficients.
    d_map = back_substitution(r_s, approx.q_factor.T)
    coupling = d_map @ a
    x = np.zeros(n)
    x[pivots] = d_map @ b
    r = a @ x - b
    weights = np.maximum(approx.residual_sq_norms, 0.0)
    total = weights.sum()
    weights = weights / total if total > 0 else np.zeros(n)

    atb_norm = float(np.linalg.norm(a.T @ b))
    denom = atb_norm if atb_norm > 0 else 1.0
    rng = np.random.default_rng(options.seed)
    cadence = options.resolve_checkpoint_every(n)
    block_size = options.block_size
    max_iterations = math.ceil(options.max_epochs * n / block_size)

    recorder = TraceRecorder(options.stop_tol, options.max_epochs, clock)
    status = recorder.checkpoint(0, 0.0, float(np.linalg.norm(a.T @ r)) / denom)
    if on_checkpoint is not None:
        on_checkpoint(x, r)
    if status is None:
        for k in range(1, max_iterations + 1):
            block = sample_block(weights, block_size, options.sampling_mode, rng)
            if block.size == 0:
                status = CONVERGED
                break
            res_cols = a[:, block] - approx.q_factor @ approx.r_factor[:, block]
            gram = res_cols.T @ res_cols
            gram = (gram + gram.T) / 2.0
            alpha, _ = _inner_solve(gram, res_cols.T @ r, options.inner_mode, options.inner_rel_tol)
            beta = coupling[:, block] @ alpha
            x[block] -= alpha
            x[pivots] += beta
            r -= res_cols @ alpha
            if k % cadence == 0 or k == max_iterations:
                rel = float(np.linalg.norm(a.T @ r)) / denom
                status = recorder.checkpoint(k, k * block_size / n, rel)
                if on_checkpoint is not None:
                    on_checkpoint(x, r)
                if status is not None:
                    break
    trace = recorder.finish(status or EPOCH_BUDGET)
    trace.extras["seed"] = options.seed
    return x, trace
