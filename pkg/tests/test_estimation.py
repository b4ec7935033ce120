import numpy as np
import pytest

from dpmimo import channel as ch
from dpmimo import estimation as est
from dpmimo.errors import DegenerateInputError


def gaussian_snapshots(layout, count, seed, scale=1.0):
    rng = np.random.default_rng(seed)
    shape = (count, 1, layout.n_rx, layout.n_tx)
    mats = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
    return ch.SnapshotSet(layout=layout, snapshots=mats * scale)


def test_normalize_region_direct_formula():
    layout = ch.PolarizationLayout.sp(4, 4)
    mats = np.full((3, 2, 4, 4), np.sqrt(0.5), dtype=complex)  # ||H||^2 = 8
    snaps = ch.SnapshotSet(layout=layout, snapshots=mats)
    scaled, scale = est.normalize_region(snaps)
    assert scale == pytest.approx(np.sqrt(2.0), abs=1e-12)
    assert np.mean(np.abs(scaled.vectors()) ** 2) * 16 == pytest.approx(16.0)


def test_normalize_region_idempotent():
    layout = ch.PolarizationLayout.sp(4, 4)
    snaps = gaussian_snapshots(layout, 500, seed=1)
    once, _ = est.normalize_region(snaps)
    again, scale = est.normalize_region(once)
    assert scale == pytest.approx(1.0, abs=1e-12)


def test_normalize_region_sp_mean_power():
    layout = ch.PolarizationLayout.sp(4, 4)
    snaps = gaussian_snapshots(layout, 300, seed=2, scale=3.7)
    scaled, _ = est.normalize_region(snaps)
    mean_power = float(np.mean(np.sum(np.abs(scaled.vectors()) ** 2, axis=1)))
    assert mean_power == pytest.approx(16.0, abs=1e-9)


def test_normalize_region_copol_only():
    # only co-polar entries enter the normalization constraint
    layout = ch.PolarizationLayout.dp(2, 2)
    rng = np.random.default_rng(3)
    mats = rng.standard_normal((200, 1, 2, 2)) + 1j * rng.standard_normal((200, 1, 2, 2))
    snaps = ch.SnapshotSet(layout=layout, snapshots=mats)
    scaled, _ = est.normalize_region(snaps)
    mask = layout.copol_mask()
    co_power = float(np.mean(np.sum(np.abs(scaled.vectors()[:, mask]) ** 2, axis=1)))
    assert co_power == pytest.approx(np.count_nonzero(mask), abs=1e-9)


def test_normalize_region_zero_power():
    layout = ch.PolarizationLayout.sp(2, 2)
    snaps = ch.SnapshotSet(layout=layout, snapshots=np.zeros((4, 1, 2, 2), dtype=complex))
    with pytest.raises(DegenerateInputError):
        est.normalize_region(snaps)


def test_estimate_moments_constant_snapshots():
    layout = ch.PolarizationLayout.sp(2, 2)
    rng = np.random.default_rng(4)
    h0 = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    snaps = ch.SnapshotSet(layout=layout, snapshots=np.broadcast_to(h0, (5, 2, 2, 2)).copy())
    stats = est.estimate_moments(snaps)
    v = h0.T.reshape(-1)  # column-major vec
    assert np.allclose(stats.r, np.outer(v, v.conj()), atol=1e-12)
    assert np.allclose(stats.t, np.sum(np.abs(v) ** 2) * np.outer(v, v.conj()), atol=1e-12)
    assert np.allclose(stats.r_tx, h0.T @ h0.conj(), atol=1e-12)


def test_estimate_moments_gaussian_limits():
    layout = ch.PolarizationLayout.sp(2, 2)
    snaps = gaussian_snapshots(layout, 100000, seed=5)
    stats = est.estimate_moments(snaps)
    n = 4
    assert np.linalg.norm(stats.r - np.eye(n)) / np.sqrt(n) < 0.03
    assert np.linalg.norm(stats.t - (n + 1) * np.eye(n)) / ((n + 1) * np.sqrt(n)) < 0.05


def test_estimate_moments_matches_analytic_at_2048():
    layout = ch.PolarizationLayout.dp(2, 2)
    model = ch.planted_model(layout, {"VV": 4.0, "HH": 4.0}, steering_seed=6)
    truth = ch.analytic_stats(model)
    snaps = ch.sample_channels(model, 16, 128, seed=7)
    stats = est.estimate_moments(snaps)
    assert np.linalg.norm(stats.r - truth.r) / np.linalg.norm(truth.r) < 0.05
    assert stats.sample_count == 2048


def test_trace_consistency_and_order_invariance():
    layout = ch.PolarizationLayout.dp(2, 2)
    model = ch.planted_model(layout, {"VV": 2.0, "HH": 3.0}, steering_seed=8)
    snaps = ch.sample_channels(model, 4, 64, seed=9)
    stats = est.estimate_moments(snaps)
    assert np.trace(stats.r).real == pytest.approx(np.trace(stats.r_tx).real, rel=1e-12)

    flipped = ch.SnapshotSet(layout=layout, snapshots=snaps.snapshots[::-1].copy())
    stats2 = est.estimate_moments(flipped)
    assert np.allclose(stats.r, stats2.r, atol=1e-12)
    assert np.allclose(stats.t, stats2.t, atol=1e-12)


def test_fourth_moment_consistency_gaussian():
    # ||T-hat - (R tr R + R^2)|| shrinks with the sample count when R_bar = 0
    layout = ch.PolarizationLayout.sp(2, 2)

    def resid(count, seed):
        snaps = gaussian_snapshots(layout, count, seed)
        stats = est.estimate_moments(snaps)
        pred = stats.r * np.trace(stats.r).real + stats.r @ stats.r
        return np.linalg.norm(stats.t - pred)

    small = np.mean([resid(1000, s) for s in range(10, 16)])
    large = np.mean([resid(16000, s) for s in range(10, 16)])
    assert large < small / 2


def test_estimate_moments_needs_two_samples():
    layout = ch.PolarizationLayout.sp(1, 1)
    snaps = ch.SnapshotSet(layout=layout, snapshots=np.ones((1, 1, 1, 1), dtype=complex))
    with pytest.raises(ValueError):
        est.estimate_moments(snaps)


def test_kfactor_constant_series():
    assert est.moment_method_kfactor(np.full(100, 2.0 + 1.0j)) == np.inf


def test_kfactor_rayleigh_near_zero():
    # the estimator is noisy near K = 0, so check the median over a few seeds
    ks = []
    for seed in range(8):
        rng = np.random.default_rng(seed)
        h = (rng.standard_normal(100000) + 1j * rng.standard_normal(100000)) / np.sqrt(2)
        ks.append(est.moment_method_kfactor(h))
    assert all(k >= 0.0 for k in ks)
    assert np.mean(ks) <= 0.05


def test_kfactor_planted_ricean():
    rng = np.random.default_rng(12)
    k_true = 2.0
    n = 100000
    los = np.sqrt(k_true / (k_true + 1)) * np.exp(1j * rng.uniform(-np.pi, np.pi, n))
    nlos = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * np.sqrt(
        0.5 / (k_true + 1)
    )
    k = est.moment_method_kfactor(los + nlos)
    assert k == pytest.approx(2.0, abs=0.1)


def test_kfactor_clamps_to_zero():
    # variance above the squared mean power forces the 0 boundary
    gains = np.array([0.1, 3.0, 0.05, 4.0, 0.02, 5.0])
    assert est.moment_method_kfactor(gains) == 0.0


def test_kfactor_rejects_short_input():
    with pytest.raises(ValueError):
        est.moment_method_kfactor(np.array([1.0]))
