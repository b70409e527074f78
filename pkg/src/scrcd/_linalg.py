"""Dense linear-algebra helpers shared by the oracle and test-scale paths."""

from __future__ import annotations

import numpy as np


def psd_pinv(m: np.ndarray, cutoff: float = 1e-12) -> np.ndarray:
    """Pseudoinverse of a symmetric psd matrix via eigendecomposition.

    Eigenvalues below ``cutoff * max(eig)`` are treated as zero.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.size == 0:
        return m.copy()
    w, v = np.linalg.eigh((m + m.T) / 2.0)
    top = w[-1]
    inv = np.where(w > cutoff * max(top, 0.0), 1.0 / np.where(w != 0.0, w, 1.0), 0.0)
    return (v * inv[None, :]) @ v.T


def pinv(m: np.ndarray, cutoff: float = 1e-12) -> np.ndarray:
    """SVD pseudoinverse with singular values below ``cutoff * sigma_max`` dropped."""
    m = np.asarray(m, dtype=np.float64)
    if m.size == 0:
        return m.T.copy()
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    keep = s > cutoff * s[0] if s[0] > 0 else np.zeros_like(s, dtype=bool)
    inv = np.where(keep, 1.0 / np.where(s != 0.0, s, 1.0), 0.0)
    return (vt.T * inv[None, :]) @ u.T


def sqrtm_psd(m: np.ndarray) -> np.ndarray:
    """Symmetric square root of a psd matrix (negatives clamped to zero)."""
    w, v = np.linalg.eigh((m + m.T) / 2.0)
    return (v * np.sqrt(np.maximum(w, 0.0))[None, :]) @ v.T


def inv_sqrtm_pd(m: np.ndarray) -> np.ndarray:
    """Inverse symmetric square root of a positive definite matrix."""
    w, v = np.linalg.eigh((m + m.T) / 2.0)
    if w[0] <= 0:
        raise ValueError("matrix is not positive definite")
    return (v / np.sqrt(w)[None, :]) @ v.T


def lambda_min_plus(m: np.ndarray, cutoff: float = 1e-10) -> float:
    """Smallest eigenvalue above ``cutoff * lambda_max`` of a symmetric matrix."""
    w = np.linalg.eigvalsh((m + m.T) / 2.0)
    top = w[-1]
    positive = w[w > cutoff * max(top, 0.0)]
    if positive.size == 0:
        raise ValueError("matrix has no eigenvalue above the cutoff")
    return float(positive[0])


def orthonormal_range(x: np.ndarray, cutoff: float = 1e-10) -> np.ndarray:
    """Orthonormal basis of ``range(x)`` as columns, via SVD."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        return np.zeros((x.shape[0], 0))
    u, s, _ = np.linalg.svd(x, full_matrices=False)
    keep = s > cutoff * s[0] if s[0] > 0 else np.zeros_like(s, dtype=bool)
    return u[:, keep]


def min_eig_on_range(m: np.ndarray, span: np.ndarray, cutoff: float = 1e-10) -> float:
    """Smallest eigenvalue of ``m`` restricted to ``range(span)``."""
    basis = orthonormal_range(span, cutoff)
    if basis.shape[1] == 0:
        raise ValueError("restriction subspace is trivial")
    return float(np.linalg.eigvalsh(basis.T @ m @ basis)[0])
