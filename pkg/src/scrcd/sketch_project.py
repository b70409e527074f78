"""Dense reference implementation of constrained sketch-and-project.

Small-scale, eigendecomposition-based realization of the general iteration
``x' = argmin ||x' - x||_B  s.t.  S A x' = S b,  Q A x' = Q b`` together with
its projector calculus.  This module is the correctness and rate oracle for
the fast solvers; everything here is dense and meant for ``n <= 128``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._linalg import inv_sqrtm_pd, lambda_min_plus, pinv, psd_pinv, sqrtm_psd
from .nystrom import dense_nystrom

_FEASIBILITY_TOL = 1e-10


def _constraint_scale(a: np.ndarray, b: np.ndarray, x: np.ndarray) -> float:
    return float(np.linalg.norm(a, "fro") * np.linalg.norm(x) + np.linalg.norm(b) + 1.0)


@dataclass(frozen=True)
class FrameworkProblem:
    """A linear system with a norm geometry and an affine constraint.

    ``geometry`` is the positive definite matrix inducing the projection norm;
    ``constraint`` rows define the subspace ``{x : (constraint @ a) x =
    constraint @ b}`` that all iterates stay on; ``x0`` must already satisfy
    it.
    """

    a: np.ndarray
    b: np.ndarray
    geometry: np.ndarray
    constraint: np.ndarray
    x0: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.float64)
        b = np.asarray(self.b, dtype=np.float64)
        geometry = np.asarray(self.geometry, dtype=np.float64)
        constraint = np.asarray(self.constraint, dtype=np.float64)
        x0 = np.asarray(self.x0, dtype=np.float64)
        if np.linalg.eigvalsh((geometry + geometry.T) / 2.0)[0] <= 0:
            raise ValueError("geometry matrix must be positive definite")
        gap = np.linalg.norm(constraint @ (a @ x0 - b))
        if gap > _FEASIBILITY_TOL * _constraint_scale(a, b, x0):
            raise ValueError("x0 does not satisfy the subspace constraint")
        for name, value in (("a", a), ("b", b), ("geometry", geometry), ("constraint", constraint), ("x0", x0)):
            object.__setattr__(self, name, value)


@dataclass(frozen=True)
class ProjectorPair:
    """Constraint projector ``P`` and sketch projector ``Z`` (both orthogonal)."""

    p: np.ndarray
    z: np.ndarray


def make_feasible(a, b, geometry, constraint, x_init) -> np.ndarray:
    """Geometry-norm projection of ``x_init`` onto the constraint subspace."""
    a = np.asarray(a, dtype=np.float64)
    qa = np.asarray(constraint, dtype=np.float64) @ a
    qb = np.asarray(constraint, dtype=np.float64) @ np.asarray(b, dtype=np.float64)
    b_inv = np.linalg.inv(np.asarray(geometry, dtype=np.float64))
    gram = qa @ b_inv @ qa.T
    return x_init - b_inv @ qa.T @ (psd_pinv(gram) @ (qa @ x_init - qb))


def min_norm_solution(problem: FrameworkProblem) -> np.ndarray:
    """Geometry-norm projection of ``x0`` onto the full solution set of ``a x = b``."""
    a, b, geometry, x0 = problem.a, problem.b, problem.geometry, problem.x0
    b_inv = np.linalg.inv(geometry)
    gram = a @ b_inv @ a.T
    x_star = x0 - b_inv @ a.T @ (psd_pinv(gram) @ (a @ x0 - b))
    gap = np.linalg.norm(a @ x_star - b)
    if gap > 1e-8 * _constraint_scale(a, b, x_star):
        raise ValueError("system is inconsistent: no exact solution exists")
    return x_star


def projector_p(a, geometry, constraint) -> np.ndarray:
    """Orthogonal projector onto ``null(constraint @ a @ geometry^{-1/2})``."""
    a = np.asarray(a, dtype=np.float64)
    m = np.asarray(constraint, dtype=np.float64) @ a @ inv_sqrtm_pd(np.asarray(geometry, dtype=np.float64))
    p = np.eye(a.shape[1]) - pinv(m) @ m
    return (p + p.T) / 2.0


def projector_pair(problem: FrameworkProblem, sketch) -> ProjectorPair:
    """The pair ``(P, Z)`` governing one constrained sketch-and-project step."""
    p = projector_p(problem.a, problem.geometry, problem.constraint)
    b_inv_half = inv_sqrtm_pd(problem.geometry)
    x = np.asarray(sketch, dtype=np.float64) @ problem.a @ b_inv_half @ p
    z = pinv(x) @ x
    return ProjectorPair(p=p, z=(z + z.T) / 2.0)


def sc_sap_step(problem: FrameworkProblem, sketch, x) -> np.ndarray:
    """One constrained sketch-and-project update from ``x``.

    ``x`` must already satisfy the subspace constraint; the result satisfies
    both the sketched equations and the constraint (up to round-off).
    """
    a, b = problem.a, problem.b
    x = np.asarray(x, dtype=np.float64)
    gap = np.linalg.norm(problem.constraint @ (a @ x - b))
    if gap > 1e-8 * _constraint_scale(a, b, x):
        raise ValueError("iterate violates the subspace constraint")
    sketch = np.asarray(sketch, dtype=np.float64)
    b_inv_half = inv_sqrtm_pd(problem.geometry)
    p = projector_p(a, problem.geometry, problem.constraint)
    xmat = sketch @ a @ b_inv_half @ p  # l x n
    gram = xmat @ xmat.T
    correction = b_inv_half @ (xmat.T @ (psd_pinv(gram) @ (sketch @ (a @ x - b))))
    return x - correction


def scrk_block_step(a, b, pivot_rows, block, x) -> np.ndarray:
    """Constrained block Kaczmarz update (Euclidean geometry).

    ``pivot_rows`` fixes the subsystem the iterates stay on; with an empty
    pivot set this is the plain randomized block Kaczmarz update
    ``x - pinv(a[J, :]) (a[J, :] x - b[J])``.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    pivot_rows = np.asarray(pivot_rows, dtype=np.intp)
    block = np.asarray(block, dtype=np.intp)
    if pivot_rows.size:
        rows = a[pivot_rows, :]
        p = np.eye(a.shape[1]) - pinv(rows) @ rows
    else:
        p = np.eye(a.shape[1])
    ap = a[block, :] @ p
    return x - pinv(ap) @ (a[block, :] @ x - b[block])


def expected_projector_diag(a, pivots) -> np.ndarray:
    """Expected one-coordinate projector under residual-diagonal sampling.

    For the psd matrix ``a`` in its own geometry this is
    ``P a P / trace(a_res)`` where ``P`` projects onto
    ``null(e_S^T a^{1/2})`` and ``a_res`` is the Nyström residual; its nonzero
    eigenvalues match those of ``a_res / trace(a_res)``.
    """
    a = np.asarray(a, dtype=np.float64)
    pivots = np.asarray(pivots, dtype=np.intp)
    residual = a - dense_nystrom(a, pivots)
    tr = float(np.trace(residual))
    if tr <= 0.0:
        raise ValueError("residual matrix is zero: the approximation is exact")
    a_half = sqrtm_psd(a)
    n = a.shape[0]
    if pivots.size:
        core = psd_pinv(a[np.ix_(pivots, pivots)])
        p = np.eye(n) - a_half[:, pivots] @ core @ a_half[pivots, :]
    else:
        p = np.eye(n)
    expected = p @ a @ p / tr
    return (expected + expected.T) / 2.0


@dataclass(frozen=True)
class RateBounds:
    """Single-coordinate contraction bounds raised to the block size."""

    scrcd_rate: float
    scrk_rate: float
    uniform_rate: float


def rate_bounds(a, pivots, block_size: int) -> RateBounds:
    """Per-iteration expected contraction bounds for the three samplers.

    Returns ``(1 - lam_min_plus(A_res)/tr(A_res))^l`` for residual-diagonal
    coordinate sampling, ``(1 - sig_min_plus(A P)^2 / ||A P||_F^2)^l`` for
    squared-row-norm Kaczmarz sampling, and
    ``(1 - lam_min_plus(D^{-1/2} A_res D^{-1/2}) / (n - d))^l`` for uniform
    coordinate sampling.
    """
    a = np.asarray(a, dtype=np.float64)
    pivots = np.asarray(pivots, dtype=np.intp)
    n = a.shape[0]
    residual = a - dense_nystrom(a, pivots)
    residual = (residual + residual.T) / 2.0
    tr = float(np.trace(residual))
    scrcd = (1.0 - lambda_min_plus(residual) / tr) ** block_size

    if pivots.size:
        rows = a[pivots, :]
        p = np.eye(n) - pinv(rows) @ rows
    else:
        p = np.eye(n)
    ap = a @ p
    scrk = (1.0 - lambda_min_plus(ap.T @ ap) / float(np.sum(ap * ap))) ** block_size

    diag = np.diag(residual).copy()
    scale = np.where(diag > 1e-12 * max(diag.max(), 1e-300), 1.0 / np.sqrt(np.where(diag > 0, diag, 1.0)), 0.0)
    normalized = residual * scale[:, None] * scale[None, :]
    uniform = (1.0 - lambda_min_plus(normalized) / (n - pivots.size)) ** block_size
    return RateBounds(scrcd_rate=scrcd, scrk_rate=scrk, uniform_rate=uniform)
