"""Moment-based split of the channel covariance into dominant and scatter parts.

The squared dominant covariance follows from the moment identity
R_bar^2 = R tr(R) + R^2 - T; its PSD square root provides the eigenpairs from
which the dominant estimate is rebuilt, with per-eigenvector weights capped so
the remaining scatter estimate stays positive semidefinite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .channel import PolarizationLayout, SnapshotSet, kfactors_from_split
from .estimation import SecondOrderStats

RANGE_SPACE_RTOL = 1e-8
SINGULAR_RTOL = 1e-12


@dataclass(frozen=True)
class DecompositionResult:
    r_bar: np.ndarray  # dominant covariance estimate, PSD, rank <= n_dp
    r_tilde: np.ndarray  # scatter covariance estimate, PSD
    coefficients: np.ndarray  # retained weights c_k >= 0
    eigenvectors: np.ndarray  # columns are the retained unit-norm directions
    raw_eigenvalues: np.ndarray  # eigenvalues of the dominant-square root, pre-cap
    n_dp: int


def dominant_square(stats: SecondOrderStats) -> np.ndarray:
    """Estimate of R_bar^2 from the moment triple (Hermitian-symmetrized)."""
    r = stats.r
    return linalg.hermitian_part(r * np.trace(r).real + r @ r - stats.t)


def _cap_coefficient(residual: np.ndarray, u: np.ndarray, lam_plus: float) -> float:
    """Largest weight on u u^H keeping `residual` PSD, capped at lam_plus."""
    eig = linalg.hermitian_eig(residual, check=False)
    w = eig.values
    trace = float(np.sum(np.maximum(w, 0.0)))
    if trace <= 0.0:
        return 0.0
    keep = w > SINGULAR_RTOL * trace
    if not np.all(keep):
        # singular residual: only usable if u lies in its range space
        coords = eig.vectors.conj().T @ u
        outside = np.linalg.norm(coords[~keep])
        if outside > RANGE_SPACE_RTOL:
            return 0.0
        quad = float(np.sum(np.abs(coords[keep]) ** 2 / w[keep]).real)
    else:
        quad = float((u.conj() @ np.linalg.solve(residual, u)).real)
    if quad <= 0.0:
        return lam_plus
    return min(lam_plus, 1.0 / quad)


def decompose(stats: SecondOrderStats, n_dp: int, mode: str) -> DecompositionResult:
    """Split the (estimated or analytic) covariance into dominant + scatter.

    mode "SP" forces a single retained eigenvalue; "DP" allows 1..4.
    """
    if mode not in ("SP", "DP"):
        raise ValueError(f"mode must be 'SP' or 'DP', got {mode!r}")
    if mode == "SP" and n_dp != 1:
        raise ValueError("SP decomposition retains exactly one eigenvalue")
    if not 1 <= n_dp <= 4:
        raise ValueError(f"n_dp must be in 1..4, got {n_dp}")

    square = dominant_square(stats)
    sq_eig = linalg.hermitian_eig(square, check=False)
    root_vals = np.sqrt(np.maximum(sq_eig.values, 0.0))
    r_check = linalg.hermitian_part(
        (sq_eig.vectors * root_vals) @ sq_eig.vectors.conj().T
    )
    check_eig = linalg.hermitian_eig(r_check, check=False)
    lam = check_eig.values[:n_dp].copy()
    vecs = check_eig.vectors[:, :n_dp].copy()

    r_full = linalg.psd_project(stats.r)
    residual = r_full.copy()
    coeffs = np.zeros(n_dp)
    for k in range(n_dp):
        u = vecs[:, k]
        c = _cap_coefficient(residual, u, max(float(lam[k]), 0.0))
        coeffs[k] = c
        if c > 0.0:
            residual = linalg.hermitian_part(residual - c * np.outer(u, u.conj()))
    r_bar = linalg.hermitian_part(
        (vecs * coeffs) @ vecs.conj().T
    )
    r_tilde = linalg.hermitian_part(r_full - r_bar)
    return DecompositionResult(
        r_bar=r_bar,
        r_tilde=r_tilde,
        coefficients=coeffs,
        eigenvectors=vecs,
        raw_eigenvalues=lam,
        n_dp=n_dp,
    )


def decomposition_kfactors(
    result: DecompositionResult, layout: PolarizationLayout
) -> dict[str, float]:
    """Per-pair K-factors from the decomposed dominant/scatter diagonals."""
    if result.r_bar.shape[0] != layout.n_links:
        raise ValueError("decomposition size does not match the layout")
    return kfactors_from_split(
        np.diag(result.r_bar).real, np.diag(result.r_tilde).real, layout
    )


def regenerate(
    result: DecompositionResult,
    layout: PolarizationLayout,
    count: int,
    seed: int,
) -> SnapshotSet:
    """Draw channels matching the decomposed statistics.

    Each retained eigenvector gets an independent uniform phase; the scatter
    part is proper Gaussian with covariance r_tilde. Draws are independent and
    deterministic given the seed; returned as an (count, 1) snapshot grid.
    """
    if count < 1:
        raise ValueError("count must be positive")
    if result.r_bar.shape[0] != layout.n_links:
        raise ValueError("decomposition size does not match the layout")
    n = layout.n_links
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    phases = rng.uniform(-np.pi, np.pi, size=(count, result.n_dp))
    gauss = rng.standard_normal(size=(count, n, 2))
    g = (gauss[..., 0] + 1j * gauss[..., 1]) / np.sqrt(2.0)
    # r_tilde is PSD by construction; project so a numerically-zero residual
    # (tiny negative eigenvalues on a tiny trace) does not trip the PSD check
    scatter_half = linalg.psd_sqrt(linalg.psd_project(result.r_tilde))
    amps = np.sqrt(np.maximum(result.coefficients, 0.0))
    vecs = np.exp(1j * phases) @ (amps[:, None] * result.eigenvectors.T)
    vecs = vecs + g @ scatter_half.T
    mats = vecs.reshape(count, 1, layout.n_tx, layout.n_rx).transpose(0, 1, 3, 2)
    return SnapshotSet(layout=layout, snapshots=mats)
