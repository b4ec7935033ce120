"""Complex-matrix substrate: vectorization, Kronecker tools, Hermitian numerics.

Vectorization is column-major throughout (vec stacks columns), matching the
commutation-matrix identity K_{m,n} vec(A) = vec(A^T).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotPositiveSemidefiniteError

HERMITIAN_RTOL = 1e-10
PSD_CLAMP_RTOL = 1e-10


def vec(a: np.ndarray) -> np.ndarray:
    """Column-wise stacking of a 2-D array into a 1-D vector."""
    a = np.asarray(a)
    if a.ndim != 2:
        raise ValueError(f"vec expects a 2-D array, got shape {a.shape}")
    return a.reshape(-1, order="F")


def unvec(v: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Inverse of vec: reshape a length rows*cols vector column-major."""
    v = np.asarray(v)
    if v.size != rows * cols:
        raise ValueError(f"cannot unvec length {v.size} into {rows}x{cols}")
    return v.reshape(rows, cols, order="F")


def commutation_matrix(m: int, n: int) -> np.ndarray:
    """Permutation K_{m,n} with K_{m,n} vec(A) = vec(A^T) for m x n A."""
    if m < 1 or n < 1:
        raise ValueError(f"commutation matrix needs positive dimensions, got ({m}, {n})")
    k = np.zeros((m * n, m * n))
    # entry A[r, c] sits at c*m + r in vec(A) and at r*n + c in vec(A^T)
    r, c = np.meshgrid(np.arange(m), np.arange(n), indexing="ij")
    k[(r * n + c).ravel(), (c * m + r).ravel()] = 1.0
    return k


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product (thin alias so all call sites share one spelling)."""
    return np.kron(np.asarray(a), np.asarray(b))


def hadamard(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Element-wise product; shapes must match exactly."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"hadamard shape mismatch: {a.shape} vs {b.shape}")
    return a * b


def hermitian_part(a: np.ndarray) -> np.ndarray:
    """(A + A^H) / 2."""
    a = np.asarray(a)
    return (a + a.conj().T) / 2


def is_hermitian(a: np.ndarray, rtol: float = HERMITIAN_RTOL) -> bool:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    scale = max(np.linalg.norm(a), 1.0)
    return bool(np.linalg.norm(a - a.conj().T) <= rtol * scale)


@dataclass(frozen=True)
class HermitianEig:
    """Eigendecomposition with eigenvalues sorted non-increasing.

    Column k of `vectors` pairs with `values[k]`. The decomposition is made
    deterministic by fixing each eigenvector's phase (largest-magnitude entry
    real non-negative) and ordering degenerate eigenvectors lexicographically
    by the absolute values of their entries.
    """

    values: np.ndarray
    vectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.values) @ self.vectors.conj().T


def _fix_phase(u: np.ndarray) -> np.ndarray:
    i = int(np.argmax(np.abs(u)))
    pivot = u[i]
    if np.abs(pivot) == 0.0:
        return u
    return u * (np.abs(pivot) / pivot)


def hermitian_eig(a: np.ndarray, *, check: bool = True) -> HermitianEig:
    """Deterministic Hermitian eigendecomposition, eigenvalues descending."""
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"hermitian_eig expects a square matrix, got shape {a.shape}")
    if check and not is_hermitian(a):
        raise ValueError("matrix is not Hermitian within tolerance")
    h = hermitian_part(a)
    w, v = np.linalg.eigh(h)
    w = w[::-1].copy()
    v = v[:, ::-1].copy()
    for k in range(v.shape[1]):
        v[:, k] = _fix_phase(v[:, k])
    # stable tie-break inside (near-)degenerate eigenvalue groups
    scale = max(abs(w[0]), abs(w[-1]), 1e-300)
    start = 0
    for stop in range(1, len(w) + 1):
        if stop == len(w) or abs(w[stop] - w[start]) > 1e-12 * scale:
            if stop - start > 1:
                block = v[:, start:stop]
                order = np.lexsort(np.abs(block)[::-1])
                v[:, start:stop] = block[:, order]
            start = stop
    return HermitianEig(values=w, vectors=v)


def psd_sqrt(a: np.ndarray) -> np.ndarray:
    """Unique Hermitian PSD square root; clamps eigenvalue noise to zero."""
    eig = hermitian_eig(a)
    w = clamp_psd_eigenvalues(eig.values)
    return hermitian_part((eig.vectors * np.sqrt(w)) @ eig.vectors.conj().T)


def clamp_psd_eigenvalues(w: np.ndarray) -> np.ndarray:
    """Zero out small negative eigenvalues; reject genuinely indefinite spectra."""
    w = np.asarray(w, dtype=float)
    trace = float(np.sum(np.abs(w)))
    if trace == 0.0:
        return np.zeros_like(w)
    if np.min(w) < -PSD_CLAMP_RTOL * trace:
        raise NotPositiveSemidefiniteError(
            f"matrix is not PSD: min eigenvalue {np.min(w):.3e} vs trace {trace:.3e}"
        )
    return np.maximum(w, 0.0)


def psd_project(a: np.ndarray) -> np.ndarray:
    """Nearest-in-spirit PSD version of a Hermitian matrix (clamp eigenvalues)."""
    eig = hermitian_eig(a)
    w = np.maximum(eig.values, 0.0)
    return hermitian_part((eig.vectors * w) @ eig.vectors.conj().T)


def numerical_rank(a: np.ndarray, rel_tol: float = 1e-8) -> int:
    """Count of eigenvalues above rel_tol times the largest (Hermitian PSD input)."""
    eig = hermitian_eig(a)
    top = eig.values[0] if eig.values.size else 0.0
    if top <= 0.0:
        return 0
    return int(np.count_nonzero(eig.values > rel_tol * top))
