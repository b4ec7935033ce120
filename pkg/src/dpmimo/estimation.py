"""Sample-moment estimation from snapshot blocks and the reference K estimator.

Ensemble averages are replaced by plain sample means over the time-frequency
grid of one stationarity region (divisor n, no bias correction). Estimated
matrices are Hermitian-symmetrized so downstream eigendecompositions are safe.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from . import linalg
from .errors import DegenerateInputError

if TYPE_CHECKING:  # pragma: no cover
    from .channel import SnapshotSet


@dataclass(frozen=True)
class SecondOrderStats:
    """Moment triple of one region: full, TX-side, and fourth-order matrices.

    sample_count == 0 marks analytic (exact) statistics.
    """

    r: np.ndarray  # E[h h^H], size n_links
    r_tx: np.ndarray  # E[H^T H^*], size n_tx
    t: np.ndarray  # E[(h h^H)^2], size n_links
    sample_count: int

    def __post_init__(self):
        n = self.r.shape[0]
        if self.r.shape != (n, n) or self.t.shape != (n, n):
            raise ValueError("R and T must be square with equal size")
        if n % self.r_tx.shape[0]:
            raise ValueError("R_TX size must divide the vectorized channel size")
        tr_r = float(np.trace(self.r).real)
        tr_tx = float(np.trace(self.r_tx).real)
        if abs(tr_r - tr_tx) > 1e-9 * max(abs(tr_r), 1.0):
            raise ValueError(f"trace mismatch between R ({tr_r}) and R_TX ({tr_tx})")

    @property
    def n_links(self) -> int:
        return self.r.shape[0]

    @property
    def n_tx(self) -> int:
        return self.r_tx.shape[0]


def normalize_region(snapshots: "SnapshotSet") -> tuple["SnapshotSet", float]:
    """Scale one region so the mean co-polar power equals the co-polar link count."""
    from .channel import SnapshotSet

    mask = snapshots.layout.copol_mask()
    n_co = int(np.count_nonzero(mask))
    if n_co == 0:
        raise DegenerateInputError("layout has no co-polarized sub-links")
    vecs = snapshots.vectors()
    mean_power = float(np.mean(np.sum(np.abs(vecs[:, mask]) ** 2, axis=1)))
    if mean_power <= 0.0:
        raise DegenerateInputError("co-polarized sub-links carry zero power")
    scale = float(np.sqrt(n_co / mean_power))
    return (
        SnapshotSet(layout=snapshots.layout, snapshots=snapshots.snapshots * scale),
        scale,
    )


def estimate_moments(snapshots: "SnapshotSet") -> SecondOrderStats:
    """Sample moments of one region: R, R_TX, and the fourth-order matrix T."""
    n = snapshots.count
    if n < 2:
        raise ValueError("need at least two snapshots to estimate moments")
    h = snapshots.vectors()
    mats = snapshots.matrices()
    r = linalg.hermitian_part(h.T @ h.conj() / n)
    power = np.sum(np.abs(h) ** 2, axis=1)
    t = linalg.hermitian_part(np.einsum("n,ni,nj->ij", power, h, h.conj()) / n)
    r_tx = linalg.hermitian_part(
        np.einsum("nrk,nrl->kl", mats, mats.conj()) / n
    )
    return SecondOrderStats(r=r, r_tx=r_tx, t=t, sample_count=n)


def moment_method_kfactor(gains: np.ndarray) -> float:
    """Moment-based Ricean K estimate from a scalar complex gain series.

    Uses the mean and variance of |h|^2; clamps to 0 when the variance exceeds
    the squared mean (no resolvable dominant part) and returns inf for a
    constant-amplitude series.
    """
    gains = np.asarray(gains).ravel()
    if gains.size < 2:
        raise ValueError("need at least two gain samples")
    g = np.abs(gains) ** 2
    g_a = float(np.mean(g))
    g_v = float(np.var(g))
    if g_a <= 0.0:
        return 0.0
    if g_v == 0.0:
        return np.inf
    if g_v >= g_a * g_a:
        return 0.0
    root = np.sqrt(g_a * g_a - g_v)
    return float(root / (g_a - root))
