"""Generative SP/DP Ricean MIMO channel model for one stationarity region.

A channel realization splits into a dominant part (deterministic amplitudes,
random phases with a prescribed phasor correlation across polarization pairs)
and a zero-mean proper Gaussian scatter part. Channels are N_RX x N_TX; the
vectorized channel stacks columns, so sub-link index t*N_RX + r carries TX
antenna t and RX antenna r.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import DegenerateInputError
from .estimation import SecondOrderStats

PAIRS = ("VV", "VH", "HV", "HH")  # "ab" = polarization a at TX, b at RX


@dataclass(frozen=True)
class PolarizationLayout:
    """Ordered V/H tags for the TX and RX antennas."""

    tx: tuple[str, ...]
    rx: tuple[str, ...]

    def __post_init__(self):
        for side, tags in (("tx", self.tx), ("rx", self.rx)):
            if not tags or any(t not in ("V", "H") for t in tags):
                raise ValueError(f"{side} tags must be a non-empty sequence of 'V'/'H'")
        if not (self.is_sp or self.is_dp):
            raise ValueError(
                "layout must be SP (uniform tags) or DP (half V, half H on each side)"
            )

    @property
    def n_tx(self) -> int:
        return len(self.tx)

    @property
    def n_rx(self) -> int:
        return len(self.rx)

    @property
    def n_links(self) -> int:
        return self.n_tx * self.n_rx

    @property
    def is_sp(self) -> bool:
        return len(set(self.tx)) == 1 and len(set(self.rx)) == 1

    @property
    def is_dp(self) -> bool:
        def half(tags):
            return len(tags) % 2 == 0 and tags.count("V") == tags.count("H")

        return half(list(self.tx)) and half(list(self.rx))

    @property
    def mode(self) -> str:
        return "SP" if self.is_sp else "DP"

    def count_tx(self, pol: str) -> int:
        return self.tx.count(pol)

    def count_rx(self, pol: str) -> int:
        return self.rx.count(pol)

    def link_pairs(self) -> np.ndarray:
        """Pair index (0..3 into PAIRS) of every vectorized sub-link."""
        out = np.empty(self.n_links, dtype=int)
        for t in range(self.n_tx):
            for r in range(self.n_rx):
                out[t * self.n_rx + r] = PAIRS.index(self.tx[t] + self.rx[r])
        return out

    def copol_mask(self) -> np.ndarray:
        """Boolean mask over vectorized sub-links where TX and RX tags match."""
        pairs = self.link_pairs()
        return (pairs == 0) | (pairs == 3)

    @staticmethod
    def sp(n_tx: int, n_rx: int, pol: str = "V") -> "PolarizationLayout":
        return PolarizationLayout(tx=(pol,) * n_tx, rx=(pol,) * n_rx)

    @staticmethod
    def dp(n_tx: int, n_rx: int) -> "PolarizationLayout":
        if n_tx % 2 or n_rx % 2:
            raise ValueError("DP layout needs even antenna counts")
        return PolarizationLayout(
            tx=("V",) * (n_tx // 2) + ("H",) * (n_tx // 2),
            rx=("V",) * (n_rx // 2) + ("H",) * (n_rx // 2),
        )


def coupling_matrix(mode: str) -> np.ndarray:
    """Named phasor-correlation matrices across the four polarization pairs."""
    if mode == "shared":
        return np.ones((4, 4), dtype=complex)
    if mode in ("independent", "copol-independent"):
        return np.eye(4, dtype=complex)
    raise ValueError(f"unknown phase coupling mode {mode!r} (use a custom matrix instead)")


def _check_coupling(g: np.ndarray) -> np.ndarray:
    g = np.asarray(g, dtype=complex)
    if g.shape != (4, 4):
        raise ValueError("phase coupling matrix must be 4x4")
    if not linalg.is_hermitian(g):
        raise ValueError("phase coupling matrix must be Hermitian")
    if not np.allclose(np.diag(g), 1.0, atol=1e-10):
        raise ValueError("phase coupling matrix must have unit diagonal")
    if np.max(np.abs(g)) > 1.0 + 1e-10:
        raise ValueError("phase coupling entries must have magnitude at most 1")
    linalg.clamp_psd_eigenvalues(np.linalg.eigvalsh(linalg.hermitian_part(g)))
    return g


@dataclass(frozen=True)
class DominantSpec:
    """Rank-one dominant component per polarization pair.

    For pair "ab" the dominant sub-matrix is
    (rx_amplitude ⊙ rx_steering)(tx_amplitude ⊙ tx_steering)^T e^{j phi_ab},
    with the four pair phasors correlated according to `coupling`.
    Pairs missing from `components` contribute no dominant power.
    """

    components: dict[str, tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]]
    coupling: np.ndarray = field(default_factory=lambda: np.eye(4, dtype=complex))

    def __post_init__(self):
        _check_coupling(self.coupling)
        for pair, (v_tx, v_rx, d_tx, d_rx) in self.components.items():
            if pair not in PAIRS:
                raise ValueError(f"unknown polarization pair {pair!r}")
            for name, v in (("tx_amplitude", v_tx), ("rx_amplitude", v_rx)):
                if np.any(np.asarray(v) < 0):
                    raise ValueError(f"{name} of pair {pair} must be non-negative")
            for name, d in (("tx_steering", d_tx), ("rx_steering", d_rx)):
                if np.any(np.abs(np.abs(np.asarray(d)) - 1.0) > 1e-12):
                    raise ValueError(f"{name} of pair {pair} must be unit-modulus")

    @staticmethod
    def empty() -> "DominantSpec":
        return DominantSpec(components={})


@dataclass(frozen=True)
class ScatterSpec:
    """Full covariance of the vectorized Gaussian scatter part."""

    covariance: np.ndarray

    def __post_init__(self):
        cov = np.asarray(self.covariance, dtype=complex)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
            raise ValueError("scatter covariance must be square")
        if not linalg.is_hermitian(cov):
            raise ValueError("scatter covariance must be Hermitian")
        linalg.clamp_psd_eigenvalues(np.linalg.eigvalsh(linalg.hermitian_part(cov)))
        object.__setattr__(self, "covariance", cov)


@dataclass(frozen=True)
class ChannelModel:
    layout: PolarizationLayout
    dominant: DominantSpec
    scatter: ScatterSpec

    def __post_init__(self):
        n = self.layout.n_links
        if self.scatter.covariance.shape != (n, n):
            raise ValueError(
                f"scatter covariance is {self.scatter.covariance.shape}, layout needs ({n}, {n})"
            )
        for pair, (v_tx, v_rx, d_tx, d_rx) in self.dominant.components.items():
            nt = self.layout.count_tx(pair[0])
            nr = self.layout.count_rx(pair[1])
            if len(v_tx) != nt or len(d_tx) != nt or len(v_rx) != nr or len(d_rx) != nr:
                raise ValueError(f"dominant vectors of pair {pair} do not match the layout")


@dataclass(frozen=True)
class SnapshotSet:
    """Sampled channel matrices on an (n_time, n_freq) grid."""

    layout: PolarizationLayout
    snapshots: np.ndarray  # (n_time, n_freq, n_rx, n_tx) complex

    def __post_init__(self):
        s = np.asarray(self.snapshots, dtype=complex)
        if s.ndim != 4 or s.shape[2] != self.layout.n_rx or s.shape[3] != self.layout.n_tx:
            raise ValueError(f"snapshot array shape {s.shape} does not match the layout")
        object.__setattr__(self, "snapshots", s)

    @property
    def n_time(self) -> int:
        return self.snapshots.shape[0]

    @property
    def n_freq(self) -> int:
        return self.snapshots.shape[1]

    @property
    def count(self) -> int:
        return self.n_time * self.n_freq

    def matrices(self) -> np.ndarray:
        """Snapshots flattened to (count, n_rx, n_tx)."""
        return self.snapshots.reshape(self.count, self.layout.n_rx, self.layout.n_tx)

    def vectors(self) -> np.ndarray:
        """Vectorized snapshots, shape (count, n_links), column-major per matrix."""
        m = self.matrices()
        return m.transpose(0, 2, 1).reshape(self.count, -1)


def _pair_embeddings(model: ChannelModel) -> tuple[np.ndarray, np.ndarray]:
    """Per-sub-link amplitude and steering phasor in vectorized order."""
    layout = model.layout
    amp = np.zeros(layout.n_links)
    steer = np.ones(layout.n_links, dtype=complex)
    tx_idx = {p: [i for i, t in enumerate(layout.tx) if t == p] for p in "VH"}
    rx_idx = {p: [i for i, t in enumerate(layout.rx) if t == p] for p in "VH"}
    for pair, (v_tx, v_rx, d_tx, d_rx) in model.dominant.components.items():
        for lt, t in enumerate(tx_idx[pair[0]]):
            for lr, r in enumerate(rx_idx[pair[1]]):
                i = t * layout.n_rx + r
                amp[i] = v_tx[lt] * v_rx[lr]
                steer[i] = d_tx[lt] * d_rx[lr]
    return amp, steer


def analytic_dominant_covariance(model: ChannelModel) -> np.ndarray:
    """Exact covariance of the vectorized dominant part (rank at most 4)."""
    amp, steer = _pair_embeddings(model)
    pairs = model.layout.link_pairs()
    w = amp * steer
    g = _check_coupling(model.dominant.coupling)
    return linalg.hermitian_part(np.outer(w, w.conj()) * g[np.ix_(pairs, pairs)])


def analytic_scatter_covariance(model: ChannelModel) -> np.ndarray:
    return model.scatter.covariance


def tx_correlation(r_full: np.ndarray, n_tx: int, n_rx: int) -> np.ndarray:
    """Reduce a full vec-channel covariance to the TX correlation E[H^T H^*]."""
    if r_full.shape != (n_tx * n_rx, n_tx * n_rx):
        raise ValueError("full correlation matrix size does not match antenna counts")
    blocks = r_full.reshape(n_tx, n_rx, n_tx, n_rx)
    return linalg.hermitian_part(np.einsum("krlr->kl", blocks))


def analytic_stats(model: ChannelModel) -> SecondOrderStats:
    """Exact second- and fourth-order moments implied by the model."""
    r_bar = analytic_dominant_covariance(model)
    r = linalg.hermitian_part(r_bar + model.scatter.covariance)
    t = linalg.hermitian_part(r * np.trace(r).real + r @ r - r_bar @ r_bar)
    r_tx = tx_correlation(r, model.layout.n_tx, model.layout.n_rx)
    return SecondOrderStats(r=r, r_tx=r_tx, t=t, sample_count=0)


def sample_channels(model: ChannelModel, n_time: int, n_freq: int, seed: int) -> SnapshotSet:
    """Draw independent channel realizations on an (n_time, n_freq) grid.

    Randomness is split into one child stream per time row (vectorized over
    frequency), so generation parallelized across rows reproduces the
    sequential result. Deterministic given (model, seed).
    """
    if n_time < 1 or n_freq < 1:
        raise ValueError("n_time and n_freq must be positive")
    layout = model.layout
    n = layout.n_links
    amp, steer = _pair_embeddings(model)
    pairs = layout.link_pairs()
    # per-pair embedding matrices E_ab with H_bar = sum_ab E_ab * phasor_ab
    emb = np.zeros((4, n), dtype=complex)
    for p in range(4):
        sel = pairs == p
        emb[p, sel] = amp[sel] * steer[sel]
    g_half = linalg.psd_sqrt(model.dominant.coupling)
    scatter_half = linalg.psd_sqrt(model.scatter.covariance)
    have_dominant = bool(np.any(amp > 0))
    have_scatter = bool(np.trace(model.scatter.covariance).real > 0)

    out = np.zeros((n_time, n_freq, n), dtype=complex)
    children = np.random.SeedSequence(seed).spawn(n_time)
    for ti in range(n_time):
        rng = np.random.default_rng(children[ti])
        phases = rng.uniform(-np.pi, np.pi, size=(n_freq, 4))
        gauss = rng.standard_normal(size=(n_freq, n, 2))
        if have_dominant:
            u = np.exp(1j * phases)
            p = u @ g_half.T  # rows: correlated pair phasors
            mag = np.abs(p)
            p = np.where(mag > 0, p / np.where(mag > 0, mag, 1.0), 1.0)
            out[ti] += p @ emb
        if have_scatter:
            g = (gauss[..., 0] + 1j * gauss[..., 1]) / np.sqrt(2.0)
            out[ti] += g @ scatter_half.T
    mats = out.reshape(n_time, n_freq, layout.n_tx, layout.n_rx).transpose(0, 1, 3, 2)
    return SnapshotSet(layout=layout, snapshots=mats)


def ground_truth_kfactors(model: ChannelModel) -> dict[str, float]:
    """Per-pair ratio of dominant to scatter diagonal power (inf allowed)."""
    r_bar = analytic_dominant_covariance(model)
    r_tilde = model.scatter.covariance
    return kfactors_from_split(
        np.diag(r_bar).real, np.diag(r_tilde).real, model.layout
    )


def kfactors_from_split(
    dominant_diag: np.ndarray, scatter_diag: np.ndarray, layout: PolarizationLayout
) -> dict[str, float]:
    """Average dominant/scatter power ratio over each pair's sub-links."""
    pairs = layout.link_pairs()
    out: dict[str, float] = {}
    for p, name in enumerate(PAIRS):
        sel = pairs == p
        if not np.any(sel):
            continue
        ratios = []
        for bar, til in zip(dominant_diag[sel], scatter_diag[sel]):
            if til <= 0.0:
                ratios.append(np.inf if bar > 0.0 else 0.0)
            else:
                ratios.append(bar / til)
        out[name] = float(np.mean(ratios))
    return out


def planted_model(
    layout: PolarizationLayout,
    k_targets: dict[str, float],
    *,
    scatter: np.ndarray | None = None,
    coupling: np.ndarray | str = "copol-independent",
    steering_seed: int | None = None,
) -> ChannelModel:
    """Build a model whose per-pair K-factors hit the requested targets.

    With a uniform per-pair scatter diagonal d, amplitudes sqrt(K * d) on every
    sub-link of a pair yield [R_bar]_ii / [R_tilde]_ii = K exactly. Requires
    the scatter diagonal to be constant within each pair.
    """
    n = layout.n_links
    if scatter is None:
        scatter = np.eye(n, dtype=complex)
    scatter = np.asarray(scatter, dtype=complex)
    diag = np.diag(scatter).real
    pairs = layout.link_pairs()
    rng = np.random.default_rng(0 if steering_seed is None else steering_seed)
    components = {}
    for p, name in enumerate(PAIRS):
        k = float(k_targets.get(name, 0.0))
        sel = pairs == p
        if k <= 0.0 or not np.any(sel):
            continue
        d = diag[sel]
        if not np.allclose(d, d[0], rtol=1e-12, atol=0):
            raise ValueError(f"scatter diagonal must be uniform within pair {name}")
        if d[0] <= 0.0:
            raise DegenerateInputError(f"pair {name} has zero scatter power, K target undefined")
        nt = layout.count_tx(name[0])
        nr = layout.count_rx(name[1])
        scale = (k * d[0]) ** 0.25
        v_tx = np.full(nt, scale)
        v_rx = np.full(nr, scale)
        if steering_seed is None:
            d_tx = np.ones(nt, dtype=complex)
            d_rx = np.ones(nr, dtype=complex)
        else:
            d_tx = np.exp(1j * rng.uniform(-np.pi, np.pi, size=nt))
            d_rx = np.exp(1j * rng.uniform(-np.pi, np.pi, size=nr))
        components[name] = (v_tx, v_rx, d_tx, d_rx)
    if isinstance(coupling, str):
        coupling = coupling_matrix(coupling)
    dom = DominantSpec(components=components, coupling=coupling)
    return ChannelModel(layout=layout, dominant=dom, scatter=ScatterSpec(covariance=scatter))
