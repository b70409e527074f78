"""Comparison solvers: block coordinate descent, CG, and Nyström PCG.

All three share the trace conventions of the constrained solver.  Epoch
accounting: a coordinate-descent iteration costs ``block_size / n`` epochs,
while one CG/PCG iteration is one epoch (a full pass over the matrix).
"""

from __future__ import annotations

import math
import time

import numpy as np

from .matrix_core import MatrixSource, TriangularFactor, back_substitution, forward_substitution
from .nystrom import NystromApproximation
from .solver import SolveOptions, _inner_solve, sample_block
from .trace import CONVERGED, EPOCH_BUDGET, ConvergenceTrace, TraceRecorder


def block_rcd_solve(
    src: MatrixSource,
    b: np.ndarray,
    options: SolveOptions,
    clock=time.monotonic,
    on_state=None,
) -> tuple[np.ndarray, ConvergenceTrace]:
    """Plain randomized block coordinate descent on a psd system.

    Blocks are sampled from ``diag(A)`` (or uniformly) according to
    ``options.sampling_mode``; each update solves
    ``A[J, J] alpha = r[J]`` and maintains the residual incrementally.
    Identical to the constrained solver run with an empty pivot set.
    """
    b = np.asarray(b, dtype=np.float64)
    n = src.dim
    if b.shape != (n,):
        raise ValueError(f"right-hand side must have shape ({n},)")
    options.validate(n, 0)
    diag = np.maximum(src.diagonal().astype(np.float64), 0.0)
    total = diag.sum()
    weights = diag / total if total > 0 else np.zeros(n)
    x = np.zeros(n)
    r = np.zeros(n) - b
    rng = np.random.default_rng(options.seed)
    cadence = options.resolve_checkpoint_every(n)
    block_size = options.block_size
    max_iterations = math.ceil(options.max_epochs * n / block_size)
    b_norm = float(np.linalg.norm(b))
    denom = b_norm if b_norm > 0 else 1.0

    recorder = TraceRecorder(options.stop_tol, options.max_epochs, clock)
    status = recorder.checkpoint(0, 0.0, float(np.linalg.norm(r)) / denom)
    if status is None:
        for k in range(1, max_iterations + 1):
            block = sample_block(weights, block_size, options.sampling_mode, rng)
            if block.size == 0:
                status = CONVERGED
                break
            cols = src.columns(block)
            m = cols[block, :]
            m = (m + m.T) / 2.0
            alpha, _ = _inner_solve(m, r[block], options.inner_mode, options.inner_rel_tol)
            x[block] -= alpha
            r -= cols @ alpha
            if k % cadence == 0 or k == max_iterations:
                status = recorder.checkpoint(k, k * block_size / n, float(np.linalg.norm(r)) / denom)
                if on_state is not None:
                    on_state(x, r)
                if status is not None:
                    break
    trace = recorder.finish(status or EPOCH_BUDGET)
    trace.extras["seed"] = options.seed
    return x, trace


def cg_solve(
    src: MatrixSource,
    b: np.ndarray,
    options: SolveOptions,
    clock=time.monotonic,
) -> tuple[np.ndarray, ConvergenceTrace]:
    """Conjugate gradient with a per-iteration residual trace.

    The step/orthogonality coefficients are kept in ``trace.extras`` so the
    Lanczos tridiagonal (and hence the observed Ritz values) can be rebuilt.

    Raises:
        ValueError: if a search direction gives ``p^T A p <= 0`` beyond
            round-off (matrix not psd).
    """
    b = np.asarray(b, dtype=np.float64)
    n = src.dim
    if b.shape != (n,):
        raise ValueError(f"right-hand side must have shape ({n},)")
    x = np.zeros(n)
    r = b.copy()
    p = r.copy()
    rs = float(r @ r)
    b_norm = float(np.linalg.norm(b))
    denom = b_norm if b_norm > 0 else 1.0
    max_iterations = math.ceil(options.max_epochs)
    step_coeffs: list[float] = []
    ortho_coeffs: list[float] = []

    recorder = TraceRecorder(options.stop_tol, options.max_epochs, clock)
    status = recorder.checkpoint(0, 0.0, math.sqrt(rs) / denom)
    if status is None:
        for k in range(1, max_iterations + 1):
            ap = src.matvec(p)
            pap = float(p @ ap)
            if pap <= 0.0:
                if math.sqrt(rs) <= 1e-14 * denom:
                    status = CONVERGED
                    break
                raise ValueError("CG breakdown: p^T A p <= 0, matrix is not psd")
            gamma = rs / pap
            x += gamma * p
            r -= gamma * ap
            rs_new = float(r @ r)
            step_coeffs.append(gamma)
            ortho_coeffs.append(rs_new / rs)
            status = recorder.checkpoint(k, float(k), math.sqrt(rs_new) / denom)
            if status is not None:
                break
            p = r + (rs_new / rs) * p
            rs = rs_new
    trace = recorder.finish(status or EPOCH_BUDGET)
    trace.extras["seed"] = options.seed
    trace.extras["cg_step_coeffs"] = step_coeffs
    trace.extras["cg_ortho_coeffs"] = ortho_coeffs
    return x, trace


def cg_ritz_values(trace: ConvergenceTrace) -> np.ndarray:
    """Eigenvalues of the Lanczos tridiagonal recovered from a CG trace."""
    gammas = np.asarray(trace.extras["cg_step_coeffs"], dtype=np.float64)
    betas = np.asarray(trace.extras["cg_ortho_coeffs"], dtype=np.float64)
    k = gammas.size
    if k == 0:
        return np.zeros(0)
    t = np.zeros((k, k))
    for i in range(k):
        t[i, i] = 1.0 / gammas[i]
        if i > 0:
            t[i, i] += betas[i - 1] / gammas[i - 1]
        if i + 1 < k:
            off = math.sqrt(betas[i]) / gammas[i]
            t[i, i + 1] = off
            t[i + 1, i] = off
    return np.linalg.eigvalsh(t)


class NystromPreconditioner:
    """Applies ``(F F^T + lam I)^{-1}`` through a Woodbury identity.

    The small Gram system ``(F^T F + lam I)`` is Cholesky-factored once at
    construction; each apply costs two triangular solves plus two thin
    matrix-vector products.
    """

    def __init__(self, factor: np.ndarray, lam: float):
        if lam <= 0:
            raise ValueError("ridge parameter must be positive")
        self.factor = np.asarray(factor, dtype=np.float64)
        self.lam = float(lam)
        d = self.factor.shape[1]
        gram = self.factor.T @ self.factor + self.lam * np.eye(d)
        self._chol = TriangularFactor(np.linalg.cholesky(gram), lower=True)

    def apply(self, v: np.ndarray) -> np.ndarray:
        """``M^{-1} v`` for ``M = F F^T + lam I``."""
        w = self.factor.T @ np.asarray(v, dtype=np.float64)
        y = back_substitution(self._chol.transpose, forward_substitution(self._chol, w))
        return (v - self.factor @ y) / self.lam

    def matrix(self) -> np.ndarray:
        """Dense ``M`` (test-scale use only)."""
        n = self.factor.shape[0]
        return self.factor @ self.factor.T + self.lam * np.eye(n)


def nystrom_pcg_solve(
    src: MatrixSource,
    b: np.ndarray,
    approx: NystromApproximation,
    lam: float,
    options: SolveOptions,
    clock=time.monotonic,
) -> tuple[np.ndarray, ConvergenceTrace]:
    """Preconditioned CG with the Nyström preconditioner ``F F^T + lam I``.

    ``src`` is the full regularized system; ``approx`` should approximate the
    unregularized part (its factor and the ridge define the preconditioner).
    The trace reports the plain relative residual, not the preconditioned one.
    """
    b = np.asarray(b, dtype=np.float64)
    n = src.dim
    if b.shape != (n,):
        raise ValueError(f"right-hand side must have shape ({n},)")
    precond = NystromPreconditioner(approx.factor, lam)
    x = np.zeros(n)
    r = b.copy()
    z = precond.apply(r)
    p = z.copy()
    rz = float(r @ z)
    b_norm = float(np.linalg.norm(b))
    denom = b_norm if b_norm > 0 else 1.0
    max_iterations = math.ceil(options.max_epochs)

    recorder = TraceRecorder(options.stop_tol, options.max_epochs, clock)
    status = recorder.checkpoint(0, 0.0, float(np.linalg.norm(r)) / denom)
    if status is None:
        for k in range(1, max_iterations + 1):
            ap = src.matvec(p)
            pap = float(p @ ap)
            if pap <= 0.0:
                if float(np.linalg.norm(r)) <= 1e-14 * denom:
                    status = CONVERGED
                    break
                raise ValueError("PCG breakdown: p^T A p <= 0, matrix is not psd")
            gamma = rz / pap
            x += gamma * p
            r -= gamma * ap
            status = recorder.checkpoint(k, float(k), float(np.linalg.norm(r)) / denom)
            if status is not None:
                break
            z = precond.apply(r)
            rz_new = float(r @ z)
            p = z + (rz_new / rz) * p
            rz = rz_new
    trace = recorder.finish(status or EPOCH_BUDGET)
    trace.extras["seed"] = options.seed
    return x, trace
