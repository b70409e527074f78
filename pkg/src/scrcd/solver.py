"""Subspace-constrained randomized block coordinate descent solver.

The solver keeps every iterate on the affine set ``{x : A[S, :] x = b[S]}``
anchored at the Nyström pivot set ``S``.  Each iteration samples a coordinate
block ``J`` disjoint from ``S``, solves the small residual-matrix system
``(A[J, J] - F[J, :] F[J, :]^T) alpha = r[J]``, and updates the ``J`` and
``S`` coordinates together so the constraint is preserved while the residual
is maintained incrementally.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass

import numpy as np

from .matrix_core import MatrixSource, back_substitution, forward_substitution
from .nystrom import NystromApproximation
from .trace import CONVERGED, EPOCH_BUDGET, ConvergenceTrace, TraceRecorder, write_summary_json

SAMPLING_MODES = ("diag_iid", "diag_no_replace", "uniform")
INNER_MODES = ("direct", "pcg")


@dataclass
class SolveOptions:
    """Knobs shared by the block solvers.

    ``checkpoint_every=None`` resolves to one checkpoint roughly every tenth
    of an epoch: ``max(1, n // (10 * block_size))`` iterations.
    """

    block_size: int
    sampling_mode: str = "diag_no_replace"
    inner_mode: str = "direct"
    inner_rel_tol: float = 0.05
    stop_tol: float = 1e-8
    max_epochs: float = 100.0
    checkpoint_every: int | None = None
    seed: int = 0

    def validate(self, n: int, pivot_count: int) -> None:
        if self.block_size < 1:
            raise ValueError("block_size must be at least 1")
        if pivot_count < n and self.block_size > n - pivot_count:
            raise ValueError(
                f"block_size {self.block_size} exceeds n - d = {n - pivot_count}"
            )
        if self.sampling_mode not in SAMPLING_MODES:
            raise ValueError(f"unknown sampling_mode {self.sampling_mode!r}")
        if self.inner_mode not in INNER_MODES:
            raise ValueError(f"unknown inner_mode {self.inner_mode!r}")
        if not 0.0 < self.inner_rel_tol < 1.0:
            raise ValueError("inner_rel_tol must lie in (0, 1)")
        if self.stop_tol <= 0:
            raise ValueError("stop_tol must be positive")
        if self.max_epochs <= 0:
            raise ValueError("max_epochs must be positive")

    def resolve_checkpoint_every(self, n: int) -> int:
        if self.checkpoint_every is not None:
            if self.checkpoint_every < 1:
                raise ValueError("checkpoint_every must be at least 1")
            return self.checkpoint_every
        return max(1, n // (10 * self.block_size))


@dataclass
class SolverState:
    """Mutable state of a solve: iterate, maintained residual, and sampling data.

    ``coupling`` is the ``d x n`` matrix carrying a block correction ``alpha``
    onto the pivot coordinates (``beta = coupling[:, J] @ alpha``); ``weights``
    are the normalized sampling probabilities, identically zero on the pivots.
    """

    x: np.ndarray
    residual: np.ndarray
    coupling: np.ndarray
    weights: np.ndarray
    pivots: np.ndarray
    iteration: int = 0
    epochs: float = 0.0
    inner_cap_hits: int = 0

    def copy(self) -> "SolverState":
        return SolverState(
            x=self.x.copy(),
            residual=self.residual.copy(),
            coupling=self.coupling,
            weights=self.weights,
            pivots=self.pivots,
            iteration=self.iteration,
            epochs=self.epochs,
            inner_cap_hits=self.inner_cap_hits,
        )


def init(src: MatrixSource, approx: NystromApproximation, b: np.ndarray) -> SolverState:
    """Initial state with ``x`` solving the pivot subsystem ``A[S, :] x = b[S]``.

    Costs ``O(d^2)`` for the pivot solve (two triangular substitutions with
    ``F[S, :]``), one ``d``-column fetch for the residual, and ``O(d^2 n)``
    for the coupling matrix ``(F[S, :])^-T F^T``.
    """
    b = np.asarray(b, dtype=np.float64)
    n = src.dim
    if b.shape != (n,):
        raise ValueError(f"right-hand side must have shape ({n},)")
    if approx.dim != n:
        raise ValueError("approximation dimension does not match the source")
    pivots = approx.pivots
    if approx.rank > 0:
        fs = approx.pivot_factor()
        beta = back_substitution(fs.transpose, forward_substitution(fs, b[pivots]))
        coupling = back_substitution(fs.transpose, approx.factor.T)
    else:
        beta = np.zeros(0)
        coupling = np.zeros((0, n))
    x = np.zeros(n)
    x[pivots] = beta
    residual = src.columns(pivots) @ beta - b
    weights = np.maximum(approx.residual_diag, 0.0)
    total = weights.sum()
    weights = weights / total if total > 0 else np.zeros(n)
    return SolverState(x=x, residual=residual, coupling=coupling, weights=weights, pivots=pivots)


def sample_block(weights: np.ndarray, block_size: int, mode: str, rng: np.random.Generator) -> np.ndarray:
    """Sample a coordinate block from the support of ``weights``.

    ``diag_iid`` draws ``block_size`` i.i.d. indices and removes duplicates
    (the projection is unchanged by duplicates, and deduplication improves the
    conditioning of the block system).  ``diag_no_replace`` performs weighted
    sampling without replacement via exponential race keys, equivalent to
    sequential renormalized draws.  ``uniform`` samples the support uniformly
    without replacement.  An empty result signals that the residual matrix is
    zero and the iterate already solves the system on ``range(A)``.
    """
    support = np.flatnonzero(weights > 0)
    if support.size == 0:
        return np.empty(0, dtype=np.intp)
    if mode == "diag_iid":
        draws = rng.choice(len(weights), size=block_size, replace=True, p=weights)
        return np.unique(draws).astype(np.intp)
    if mode == "diag_no_replace":
        k = min(block_size, support.size)
        keys = rng.exponential(size=support.size) / weights[support]
        chosen = support[np.argpartition(keys, k - 1)[:k]]
        return np.sort(chosen).astype(np.intp)
    if mode == "uniform":
        k = min(block_size, support.size)
        chosen = rng.choice(support, size=k, replace=False)
        return np.sort(chosen).astype(np.intp)
    raise ValueError(f"unknown sampling mode {mode!r}")


def _min_norm_direct(m: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((m + m.T) / 2.0)
    cutoff = 1e-12 * max(w[-1], 0.0)
    coeff = v.T @ rhs
    inv = np.where(w > cutoff, 1.0 / np.where(w != 0.0, w, 1.0), 0.0)
    return v @ (coeff * inv)


def _jacobi_pcg(m: np.ndarray, rhs: np.ndarray, rel_tol: float) -> tuple[np.ndarray, bool]:
    """Jacobi-preconditioned CG from zero; returns (solution, cap_hit)."""
    size = rhs.shape[0]
    diag = np.diag(m).copy()
    diag[diag <= 0] = 1.0
    alpha = np.zeros(size)
    r = rhs.copy()
    z = r / diag
    rz = float(r @ z)
    norm0 = math.sqrt(max(rz, 0.0))
    if norm0 == 0.0:
        return alpha, False
    p = z.copy()
    for _ in range(size):
        mp = m @ p
        denom = float(p @ mp)
        if denom <= 0.0:
            return alpha, False
        gamma = rz / denom
        alpha += gamma * p
        r -= gamma * mp
        z = r / diag
        rz_new = float(r @ z)
        if math.sqrt(max(rz_new, 0.0)) <= rel_tol * norm0:
            return alpha, False
        p = z + (rz_new / rz) * p
        rz = rz_new
    return alpha, True


def _inner_solve(m: np.ndarray, rhs: np.ndarray, mode: str, rel_tol: float) -> tuple[np.ndarray, bool]:
    if np.any(np.isnan(m)) or np.any(np.isnan(rhs)):
        raise ValueError("NaN in inner system")
    if mode == "direct":
        return _min_norm_direct(m, rhs), False
    if mode == "pcg":
        return _jacobi_pcg(m, rhs, rel_tol)
    raise ValueError(f"unknown inner mode {mode!r}")


def inner_solve(m: np.ndarray, rhs: np.ndarray, mode: str = "direct", rel_tol: float = 0.05) -> np.ndarray:
    """Solve the psd block system ``m @ alpha = rhs``.

    ``direct`` returns the min-norm solution through a symmetric
    eigendecomposition with relative cutoff ``1e-12``; ``pcg`` runs
    Jacobi-preconditioned conjugate gradient from zero until the
    preconditioned residual drops by ``rel_tol``, capped at ``len(rhs)``
    iterations.
    """
    alpha, _ = _inner_solve(np.asarray(m, dtype=np.float64), np.asarray(rhs, dtype=np.float64), mode, rel_tol)
    return alpha


def step(
    state: SolverState,
    src: MatrixSource,
    approx: NystromApproximation,
    block: np.ndarray,
    options: SolveOptions,
) -> SolverState:
    """One constrained block update; mutates and returns ``state``.

    Fetches ``A[:, J]`` once, forms the residual block
    ``A[J, J] - F[J, :] F[J, :]^T``, and applies the coupled coordinate and
    residual updates in ``O((l + d) n + l^2 d)`` plus the inner solve.
    """
    block = np.asarray(block, dtype=np.intp)
    cols = src.columns(block)
    f_block = approx.factor[block, :]
    m = cols[block, :] - f_block @ f_block.T
    m = (m + m.T) / 2.0
    alpha, cap_hit = _inner_solve(m, state.residual[block], options.inner_mode, options.inner_rel_tol)
    beta = state.coupling[:, block] @ alpha
    state.x[block] -= alpha
    state.x[state.pivots] += beta
    state.residual -= cols @ alpha - approx.factor @ (f_block.T @ alpha)
    if cap_hit:
        state.inner_cap_hits += 1
    return state


def solve(
    src: MatrixSource,
    approx: NystromApproximation,
    b: np.ndarray,
    options: SolveOptions,
    clock=time.monotonic,
    on_checkpoint=None,
) -> tuple[np.ndarray, ConvergenceTrace]:
    """Run the constrained solver until tolerance, epoch budget, or stall.

    Args:
        src: Symmetric psd matrix oracle.
        approx: Nyström approximation of the same matrix (rank 0 allowed, in
            which case the method reduces to plain block coordinate descent).
        b: Right-hand side.
        options: Solver options; ``options.seed`` fully determines the run.
        clock: Monotonic clock used for the (non-deterministic) elapsed-time
            column of the trace.
        on_checkpoint: Optional callback invoked as ``on_checkpoint(state)``
            after each recorded checkpoint, for diagnostics.

    Returns:
        The final iterate and the convergence trace.
    """
    n = src.dim
    options.validate(n, approx.rank)
    state = init(src, approx, b)
    rng = np.random.default_rng(options.seed)
    cadence = options.resolve_checkpoint_every(n)
    block_size = options.block_size
    max_iterations = math.ceil(options.max_epochs * n / block_size)
    b_norm = float(np.linalg.norm(b))
    denom = b_norm if b_norm > 0 else 1.0

    recorder = TraceRecorder(options.stop_tol, options.max_epochs, clock)
    status = recorder.checkpoint(0, 0.0, float(np.linalg.norm(state.residual)) / denom)
    if on_checkpoint is not None:
        on_checkpoint(state)
    if status is None:
        for k in range(1, max_iterations + 1):
            block = sample_block(state.weights, block_size, options.sampling_mode, rng)
            if block.size == 0:
                # Zero residual matrix: x already solves the system on range(A).
                status = CONVERGED
                break
            step(state, src, approx, block, options)
            state.iteration = k
            state.epochs = k * block_size / n
            if k % cadence == 0 or k == max_iterations:
                rel = float(np.linalg.norm(state.residual)) / denom
                status = recorder.checkpoint(k, state.epochs, rel)
                if on_checkpoint is not None:
                    on_checkpoint(state)
                if status is not None:
                    break
    trace = recorder.finish(status or EPOCH_BUDGET)
    trace.extras["seed"] = options.seed
    trace.extras["inner_cap_hits"] = state.inner_cap_hits
    return state.x.copy(), trace


def write_solve_summary(path, trace: ConvergenceTrace, options: SolveOptions, residual_trace_path) -> None:
    """Write the per-solve summary JSON next to a trace CSV."""
    write_summary_json(
        path,
        {
            "status": trace.status,
            "iterations": trace.iterations,
            "epochs": trace.epochs,
            "final_rel_residual": trace.final_rel_residual,
            "seed": options.seed,
            "options": asdict(options),
            "residual_trace_path": str(residual_trace_path),
        },
    )
