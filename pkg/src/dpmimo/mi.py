"""Mutual-information evaluators and transmit-input design.

All MI values are in bits. The four evaluators: exact Monte-Carlo over channel
realizations, the Jensen bound log2 det(I + rho R_TX^* Q), a second-order
correction of the Jensen bound driven by the fourth-order matrix Z, and a
closed-form lower bound on that approximation which becomes tight at high SNR.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .channel import SnapshotSet
from .errors import DegenerateInputError

LOG2E = float(np.log2(np.e))
_EIG_FLOOR = 1e-15

POLICIES = ("waterfill", "equal", "single_stream", "fixed")


@dataclass(frozen=True)
class InputDesign:
    """Unit-trace transmit covariance with eigenbasis taken from conj(R_TX)."""

    q: np.ndarray
    n_streams: int
    policy: str
    eigenbasis: np.ndarray  # columns: eigenvectors of conj(R_TX), descending
    powers: np.ndarray  # per-direction powers, same order as eigenbasis


def _waterfill(lam: np.ndarray, rho: float) -> np.ndarray:
    """Water-filling powers over directions with gains lam, unit total power."""
    powers = np.zeros_like(lam)
    eligible = np.flatnonzero(lam > _EIG_FLOOR * max(lam[0], 1.0))
    if eligible.size == 0:
        raise DegenerateInputError("all transmit-correlation eigenvalues are zero")
    if rho <= 0.0:
        powers[eligible] = 1.0 / eligible.size
        return powers
    inv = 1.0 / (rho * lam[eligible])
    for m in range(eligible.size, 0, -1):
        mu = (1.0 + np.sum(inv[:m])) / m
        if mu - inv[m - 1] > 0.0:
            powers[eligible[:m]] = mu - inv[:m]
            break
    return powers


def design_input(
    r_tx: np.ndarray,
    rho: float,
    policy: str = "waterfill",
    n_streams: int | None = None,
    powers: np.ndarray | None = None,
) -> InputDesign:
    """Build the transmit covariance aligned with the eigenvectors of conj(R_TX)."""
    if policy not in POLICIES:
        raise ValueError(f"unknown input policy {policy!r}")
    if rho < 0.0:
        raise ValueError("rho must be non-negative")
    eig = linalg.hermitian_eig(r_tx.conj())
    lam = np.maximum(eig.values, 0.0)
    if lam[0] <= 0.0:
        raise DegenerateInputError("transmit correlation matrix is zero")
    n = lam.size
    if policy == "waterfill":
        p = _waterfill(lam, rho)
    elif policy == "equal":
        if n_streams is None or not 1 <= n_streams <= n:
            raise ValueError("equal policy needs n_streams in 1..n_tx")
        p = np.zeros(n)
        p[:n_streams] = 1.0 / n_streams
    elif policy == "single_stream":
        p = np.zeros(n)
        p[0] = 1.0
    else:  # fixed
        if powers is None:
            raise ValueError("fixed policy needs explicit powers")
        p = np.asarray(powers, dtype=float)
        if p.shape != (n,) or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-10:
            raise ValueError("fixed powers must be non-negative and sum to 1")
    q = linalg.hermitian_part((eig.vectors * p) @ eig.vectors.conj().T)
    return InputDesign(
        q=q,
        n_streams=int(np.count_nonzero(p > 0)),
        policy=policy,
        eigenbasis=eig.vectors,
        powers=p,
    )


def _logdet_bits(gram_eigs: np.ndarray, rho: float) -> np.ndarray:
    """log2 det(I + rho G) from the eigenvalues of PSD G (batched)."""
    return np.sum(np.log1p(rho * np.maximum(gram_eigs, 0.0)), axis=-1) * LOG2E


def gram_eigenvalues(snapshots: SnapshotSet, design: InputDesign) -> np.ndarray:
    """Eigenvalues of H Q H^H per snapshot; reusable across an SNR sweep."""
    mats = snapshots.matrices()
    half = linalg.psd_sqrt(design.q)
    b = mats @ half  # H Q^{1/2}
    gram = b @ b.conj().transpose(0, 2, 1)
    return np.linalg.eigvalsh(gram)


def mi_exact_se(
    snapshots: SnapshotSet, design: InputDesign, rho: float
) -> tuple[float, float]:
    """Monte-Carlo MI estimate and its standard error, in bits."""
    if rho < 0.0:
        raise ValueError("rho must be non-negative")
    per_draw = _logdet_bits(gram_eigenvalues(snapshots, design), rho)
    n = per_draw.size
    se = float(np.std(per_draw) / np.sqrt(n)) if n > 1 else 0.0
    return float(np.mean(per_draw)), se


def mi_exact(snapshots: SnapshotSet, design: InputDesign, rho: float) -> float:
    """Sample mean of log2 det(I + rho H Q H^H) over the snapshot set."""
    return mi_exact_se(snapshots, design, rho)[0]


def _jensen_gram(r_tx: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Eigenvalues of conj(R_TX) Q via the similar Hermitian PSD form."""
    half = linalg.psd_sqrt(q)
    return np.linalg.eigvalsh(linalg.hermitian_part(half @ r_tx.conj() @ half))


def mi_jensen(r_tx: np.ndarray, design: InputDesign, rho: float) -> float:
    """log2 det(I + rho conj(R_TX) Q), the infinite-K limit of the MI."""
    if rho < 0.0:
        raise ValueError("rho must be non-negative")
    return float(_logdet_bits(_jensen_gram(r_tx, design.q), rho))


def z_empirical(snapshots: SnapshotSet, r_tx: np.ndarray) -> np.ndarray:
    """Sample fourth-order matrix: covariance of vec(H^H H - conj(R_TX))."""
    mats = snapshots.matrices()
    n_tx = mats.shape[2]
    if r_tx.shape != (n_tx, n_tx):
        raise ValueError("r_tx size does not match the snapshots")
    gram = np.einsum("nrk,nrl->nkl", mats.conj(), mats) - r_tx.conj()
    v = gram.transpose(0, 2, 1).reshape(gram.shape[0], -1)  # vec per snapshot
    return linalg.hermitian_part(v.T @ v.conj() / v.shape[0])


def z_model(
    r_bar: np.ndarray, r_tilde: np.ndarray, n_tx: int, n_rx: int
) -> np.ndarray:
    """Closed-form fourth-order matrix from the dominant/scatter covariances.

    Valid when dominant power sits on co-polarized sub-links only (then
    H_bar^H H_bar is deterministic and drops out of the fluctuation).
    """
    n = n_tx * n_rx
    if r_bar.shape != (n, n) or r_tilde.shape != (n, n):
        raise ValueError("covariance sizes do not match the antenna counts")
    # block matrix Y: (k,l) block is I_{n_tx} (x) X_kl with
    # X_kl[p, q] = r_tilde[(k)*n_rx + l, (p)*n_rx + q]  (0-based)
    y = np.zeros((n_tx**3, n_tx * n_rx**2), dtype=complex)
    eye = np.eye(n_tx)
    blocks = r_tilde.reshape(n_tx, n_rx, n_tx, n_rx)
    for k in range(n_tx):
        for l in range(n_rx):
            x_kl = blocks[k, l]  # shape (n_tx, n_rx)
            y[k * n_tx**2:(k + 1) * n_tx**2, l * n_tx * n_rx:(l + 1) * n_tx * n_rx] = (
                np.kron(eye, x_kl)
            )
    r_full = r_bar + r_tilde
    komm = linalg.commutation_matrix(n_tx, n_tx)
    iy = linalg.kron(eye, y)
    vec_z = iy @ linalg.vec(r_full) + linalg.kron(komm, komm) @ (
        linalg.kron(eye, y.conj()) @ linalg.vec(r_bar.conj())
    )
    z = linalg.unvec(vec_z, n_tx**2, n_tx**2)
    if not linalg.is_hermitian(z):
        raise ValueError("model fourth-order matrix came out non-Hermitian")
    return linalg.hermitian_part(z)


def mi_approx(
    rho: float, design: InputDesign, r_tx: np.ndarray, z: np.ndarray
) -> float:
    """Second-order correction of the Jensen bound using the Z matrix."""
    if rho < 0.0:
        raise ValueError("rho must be non-negative")
    base = mi_jensen(r_tx, design, rho)
    if rho == 0.0:
        return base
    n = r_tx.shape[0]
    m = design.q @ np.linalg.inv(np.eye(n) + rho * r_tx.conj() @ design.q)
    corr = float(np.trace(z @ linalg.kron(m.T, m)).real)
    return base - LOG2E * rho**2 / 2.0 * corr


def lb_penalty(r_tx: np.ndarray, z: np.ndarray, n_streams: int) -> float:
    """High-SNR penalty w (nats) of the lower bound, per active stream pair."""
    eig = linalg.hermitian_eig(r_tx.conj())
    lam = eig.values
    n = lam.size
    if n_streams < 1 or n_streams > n:
        raise ValueError("n_streams out of range")
    if np.any(lam[:n_streams] <= 0.0):
        raise ValueError("active streams require positive transmit eigenvalues")
    u = eig.vectors
    rotated = linalg.kron(u.T, u.conj().T) @ z @ linalg.kron(u.conj(), u)
    diag = np.diag(rotated).real
    w = 0.0
    for k in range(n_streams):
        for l in range(n_streams):
            w += diag[k * n + l] / (2.0 * lam[k] * lam[l])
    return float(w)


def mi_lower_bound(
    rho: float,
    design: InputDesign,
    r_tx: np.ndarray,
    z: np.ndarray,
    n_streams: int,
) -> float:
    """Jensen term minus the SNR-independent penalty; tight as rho grows."""
    if rho < 0.0:
        raise ValueError("rho must be non-negative")
    return mi_jensen(r_tx, design, rho) - LOG2E * lb_penalty(r_tx, z, n_streams)
