"""Matrix oracles and triangular-solve primitives.

A :class:`MatrixSource` exposes a symmetric psd matrix through entry,
column-block, and diagonal access only.  Column blocks are the primary bulk
primitive: the iterative solvers read ``A[:, J]`` for small index sets and
never materialize the full matrix unless it is dense to begin with.
"""

from __future__ import annotations

import abc
import csv
from dataclasses import dataclass

import numpy as np


class SingularFactorError(ValueError):
    """Raised when a triangular solve meets a zero diagonal entry."""


class MatrixSource(abc.ABC):
    """Read-only oracle for a symmetric psd matrix.

    Implementations must be immutable after construction so that column
    evaluations can safely run from multiple workers.
    """

    @property
    @abc.abstractmethod
    def dim(self) -> int:
        """Number of rows (= columns) of the matrix."""

    @abc.abstractmethod
    def entry(self, i: int, j: int) -> float:
        """Single entry ``A[i, j]``."""

    @abc.abstractmethod
    def columns(self, idx) -> np.ndarray:
        """Column block ``A[:, idx]`` as a ``(dim, len(idx))`` array."""

    @abc.abstractmethod
    def diagonal(self) -> np.ndarray:
        """Copy of ``diag(A)``."""

    def column(self, j: int) -> np.ndarray:
        return self.columns([j])[:, 0]

    def matvec(self, v: np.ndarray, batch_size: int = 512) -> np.ndarray:
        """``A @ v`` assembled from column batches in a fixed order."""
        v = np.asarray(v, dtype=np.float64)
        n = self.dim
        out = np.zeros(n)
        for start in range(0, n, batch_size):
            idx = np.arange(start, min(start + batch_size, n))
            out += self.columns(idx) @ v[idx]
        return out

    def dense(self) -> np.ndarray:
        """Materialize the full matrix (test-scale use only)."""
        return self.columns(np.arange(self.dim))


class DenseSource(MatrixSource):
    """Matrix source backed by an in-memory dense array.

    For symmetric use the logical upper triangle is the source of truth:
    the stored matrix is rebuilt from it so that ``entry(i, j) == entry(j, i)``
    holds exactly.
    """

    def __init__(self, a: np.ndarray, symmetric: bool = True):
        a = np.asarray(a, dtype=np.float64)
        if a.ndim != 2:
            raise ValueError("expected a 2-d array")
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix entries must be finite")
        if symmetric:
            if a.shape[0] != a.shape[1]:
                raise ValueError("symmetric source requires a square array")
            upper = np.triu(a)
            a = upper + upper.T - np.diag(np.diag(a))
        self._a = a
        self._a.setflags(write=False)

    @property
    def dim(self) -> int:
        return self._a.shape[0]

    def entry(self, i: int, j: int) -> float:
        return float(self._a[i, j])

    def columns(self, idx) -> np.ndarray:
        return self._a[:, np.asarray(idx, dtype=np.intp)].copy()

    def diagonal(self) -> np.ndarray:
        return np.diag(self._a).copy()

    def matvec(self, v: np.ndarray, batch_size: int = 512) -> np.ndarray:
        return self._a @ np.asarray(v, dtype=np.float64)

    def dense(self) -> np.ndarray:
        return self._a.copy()


class GaussianKernelSource(MatrixSource):
    """Lazy source for ``K + ridge * I`` with a Gaussian kernel.

    ``K[i, j] = exp(-||z_i - z_j||^2 / (2 sigma^2))`` over the rows of the
    feature table.  Entries are computed on demand from cached per-row squared
    norms using the expanded form ``||a||^2 + ||b||^2 - 2 a.b``, clamped at
    zero to avoid negative round-off; nothing of size ``n^2`` is stored.
    """

    def __init__(self, features: np.ndarray, sigma: float, ridge: float = 0.0):
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2:
            raise ValueError("features must be a 2-d table")
        if not np.all(np.isfinite(features)):
            raise ValueError("features must be finite")
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        if ridge < 0:
            raise ValueError("ridge must be nonnegative")
        self._z = np.ascontiguousarray(features)
        self._z.setflags(write=False)
        self._sigma = float(sigma)
        self._ridge = float(ridge)
        self._sq_norms = np.einsum("ij,ij->i", self._z, self._z)
        self._sq_norms.setflags(write=False)

    @property
    def dim(self) -> int:
        return self._z.shape[0]

    @property
    def sigma(self) -> float:
        return self._sigma

    @property
    def ridge(self) -> float:
        return self._ridge

    def entry(self, i: int, j: int) -> float:
        d2 = self._sq_norms[i] + self._sq_norms[j] - 2.0 * float(self._z[i] @ self._z[j])
        value = float(np.exp(-max(d2, 0.0) / (2.0 * self._sigma**2)))
        if i == j:
            value += self._ridge
        return value

    def columns(self, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.intp)
        d2 = self._sq_norms[:, None] + self._sq_norms[idx][None, :]
        d2 -= 2.0 * (self._z @ self._z[idx].T)
        np.maximum(d2, 0.0, out=d2)
        cols = np.exp(-d2 / (2.0 * self._sigma**2))
        if self._ridge != 0.0:
            cols[idx, np.arange(len(idx))] += self._ridge
        return cols

    def diagonal(self) -> np.ndarray:
        return np.full(self.dim, 1.0 + self._ridge)


def gaussian_kernel_source(features, sigma: float, ridge: float = 0.0) -> GaussianKernelSource:
    """Source for the regularized Gaussian kernel matrix over a feature table."""
    return GaussianKernelSource(features, sigma, ridge)


def synth_spectrum_source(n: int, eigenvalues, seed: int) -> DenseSource:
    """Dense psd source with a prescribed spectrum under a Haar-random rotation.

    Builds ``A = U diag(eigenvalues) U^T`` where ``U`` is obtained by QR
    orthogonalization of a seeded square standard-Gaussian matrix with the
    R-diagonal sign fix, which makes ``U`` Haar distributed.

    Args:
        n: Dimension of the matrix.
        eigenvalues: Nonincreasing, nonnegative vector of length ``n``.
        seed: Seed for the rotation.
    """
    lam = np.asarray(eigenvalues, dtype=np.float64)
    if lam.shape != (n,):
        raise ValueError(f"expected {n} eigenvalues, got shape {lam.shape}")
    if np.any(lam < 0):
        raise ValueError("eigenvalues must be nonnegative")
    if np.any(np.diff(lam) > 0):
        raise ValueError("eigenvalues must be nonincreasing")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n, n))
    q, r = np.linalg.qr(g)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    q = q * signs[None, :]
    a = (q * lam[None, :]) @ q.T
    return DenseSource(a, symmetric=True)


@dataclass(frozen=True)
class TriangularFactor:
    """Square triangular matrix used in the substitution routines.

    Entries strictly outside the stated triangle must be exactly zero.
    """

    array: np.ndarray
    lower: bool = True

    def __post_init__(self):
        a = np.asarray(self.array, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("triangular factor must be square")
        off = np.triu(a, 1) if self.lower else np.tril(a, -1)
        if np.any(off != 0.0):
            raise ValueError("entries outside the stated triangle must be zero")
        object.__setattr__(self, "array", a)

    @property
    def dim(self) -> int:
        return self.array.shape[0]

    @property
    def transpose(self) -> "TriangularFactor":
        return TriangularFactor(self.array.T.copy(), lower=not self.lower)


def forward_substitution(factor: TriangularFactor, y: np.ndarray) -> np.ndarray:
    """Solve ``L w = y`` for lower-triangular ``L`` in ``d^2`` flops per column.

    ``y`` may be a vector or a matrix of stacked right-hand-side columns.
    """
    if not factor.lower:
        raise ValueError("forward substitution requires a lower-triangular factor")
    a = factor.array
    d = factor.dim
    w = np.array(y, dtype=np.float64, copy=True)
    if w.shape[0] != d:
        raise ValueError(f"dimension mismatch: factor is {d}x{d}, rhs has leading {w.shape[0]}")
    for i in range(d):
        if a[i, i] == 0.0:
            raise SingularFactorError(f"zero diagonal entry at index {i}")
        w[i] = (w[i] - a[i, :i] @ w[:i]) / a[i, i]
    return w


def back_substitution(factor: TriangularFactor, y: np.ndarray) -> np.ndarray:
    """Solve ``U w = y`` for upper-triangular ``U``; mirror of forward substitution."""
    if factor.lower:
        raise ValueError("back substitution requires an upper-triangular factor")
    a = factor.array
    d = factor.dim
    w = np.array(y, dtype=np.float64, copy=True)
    if w.shape[0] != d:
        raise ValueError(f"dimension mismatch: factor is {d}x{d}, rhs has leading {w.shape[0]}")
    for i in range(d - 1, -1, -1):
        if a[i, i] == 0.0:
            raise SingularFactorError(f"zero diagonal entry at index {i}")
        w[i] = (w[i] - a[i, i + 1 :] @ w[i + 1 :]) / a[i, i]
    return w


def load_dense_csv(path) -> np.ndarray:
    """Load a dense 64-bit real matrix from a comma-separated file.

    A single leading header row (any non-numeric cell) is skipped.
    """
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader):
            if not row:
                continue
            try:
                rows.append([float(cell) for cell in row])
            except ValueError:
                if lineno == 0:
                    continue  # header row
                raise ValueError(f"non-numeric cell in row {lineno}") from None
    if not rows:
        raise ValueError(f"no numeric rows found in {path}")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ValueError("rows have inconsistent lengths")
    return np.asarray(rows, dtype=np.float64)
