"""Acceptance gate: one test per numbered criterion.

Each test prints a single "criterion N [PASS|FAIL] ..." line before asserting,
so a plain `pytest -v` run yields a readable scoreboard. Every expected value
was computed independently (closed form or a reference implementation) before
being frozen here; tolerances are part of the contract and must not be
loosened to make a failing check pass.
"""

import time

import numpy as np
import pytest

from dpmimo import channel as ch
from dpmimo import crossing as cr
from dpmimo import decomposition as dec
from dpmimo import estimation as est
from dpmimo import linalg, mi
from dpmimo import scenario as scn
from dpmimo import snapshot_io as sio
from dpmimo.config import preset_config


def _verdict(num: int, ok: bool, detail: str) -> None:
    print(f"criterion {num:2d} [{'PASS' if ok else 'FAIL'}] {detail}")
    assert ok, f"criterion {num}: {detail}"


def _exp_corr(n: int, r: float) -> np.ndarray:
    idx = np.arange(n)
    return np.power(r, np.abs(idx[:, None] - idx[None, :])).astype(complex)


def _random_scatter(rng: np.random.Generator, n_tx: int, n_rx: int) -> np.ndarray:
    """Unit-diagonal Kronecker scatter covariance with random correlations."""
    return np.kron(
        _exp_corr(n_tx, float(rng.uniform(0.0, 0.7))),
        _exp_corr(n_rx, float(rng.uniform(0.0, 0.7))),
    )


def _random_copol_model(rng: np.random.Generator, n: int) -> ch.ChannelModel:
    layout = ch.PolarizationLayout.dp(n, n)
    return ch.planted_model(
        layout,
        {"VV": float(rng.uniform(0.5, 8.0)), "HH": float(rng.uniform(0.5, 8.0))},
        scatter=_random_scatter(rng, n, n),
        steering_seed=int(rng.integers(0, 2**31)),
    )


def test_criterion_1_fourth_moment_identity():
    """T_hat from 1e6 draws matches R tr(R) + R^2 - R_bar^2 within 2%."""
    rng = np.random.default_rng(101)
    t_start = time.perf_counter()
    worst = 0.0
    cases = [(2, "DP"), (2, "DP"), (4, "DP"), (4, "DP"), (4, "SP")]
    for n, mode in cases:
        if mode == "SP":
            layout = ch.PolarizationLayout.sp(n, n)
            model = ch.planted_model(
                layout,
                {"VV": float(rng.uniform(0.5, 8.0))},
                scatter=_random_scatter(rng, n, n),
                steering_seed=int(rng.integers(0, 2**31)),
            )
        else:
            model = _random_copol_model(rng, n)
        snaps = ch.sample_channels(model, 100, 10000, seed=int(rng.integers(0, 2**31)))
        t_hat = est.estimate_moments(snaps).t
        t_true = ch.analytic_stats(model).t
        err = np.linalg.norm(t_hat - t_true) / np.linalg.norm(t_true)
        worst = max(worst, err)
    elapsed = time.perf_counter() - t_start
    ok = worst <= 0.02 and elapsed <= 120.0
    _verdict(1, ok, f"worst fourth-moment error {worst:.4f} (<= 0.02), {elapsed:.1f} s (<= 120 s)")


def test_criterion_2_exact_recovery():
    """Analytic moments with independent co-pol phases recover R_bar to 1e-8."""
    rng = np.random.default_rng(202)
    worst = 0.0
    for _ in range(20):
        model = _random_copol_model(rng, int(rng.choice([2, 4])))
        r_bar = ch.analytic_dominant_covariance(model)
        res = dec.decompose(
            ch.analytic_stats(model), n_dp=linalg.numerical_rank(r_bar), mode="DP"
        )
        err = np.linalg.norm(res.r_bar - r_bar) / np.linalg.norm(r_bar)
        worst = max(worst, err)
    ok = worst <= 1e-8
    _verdict(2, ok, f"worst dominant recovery error {worst:.2e} (<= 1e-8) over 20 models")


def test_criterion_3_decomposition_under_noise():
    """2048-snapshot decomposed K within 20% of truth, below Greenstein on average."""
    k_true = 4.0
    layout = ch.PolarizationLayout.dp(4, 4)
    hits = 0
    dec_means, green_means = [], []
    for seed in range(50):
        model = ch.planted_model(
            layout, {"VV": k_true, "HH": k_true}, steering_seed=1000 + seed
        )
        snaps = ch.sample_channels(model, 16, 128, seed=2000 + seed)
        snaps, _ = est.normalize_region(snaps)
        res = dec.decompose(est.estimate_moments(snaps), n_dp=2, mode="DP")
        k_dec = dec.decomposition_kfactors(res, layout)
        k_green = scn.greenstein_kfactors(snaps)
        if all(abs(k_dec[p] - k_true) <= 0.2 * k_true for p in ("VV", "HH")):
            hits += 1
        dec_means.append(np.mean([k_dec["VV"], k_dec["HH"]]))
        green_means.append(np.mean([k_green["VV"], k_green["HH"]]))
    low_bias = float(np.mean(dec_means)) <= float(np.mean(green_means))
    ok = hits >= 45 and low_bias
    _verdict(
        3,
        ok,
        f"{hits}/50 seeds within 20% (need >= 45); "
        f"mean K dec {np.mean(dec_means):.3f} <= Greenstein {np.mean(green_means):.3f}: {low_bias}",
    )


def test_criterion_4_psd_safeguard():
    """Scatter estimate stays PSD (up to -1e-10 tr) on 1000 fuzzed inputs."""
    rng = np.random.default_rng(404)
    violations = 0
    worst_ratio = 0.0
    for _ in range(1000):
        n = int(rng.choice([2, 2, 2, 4]))
        layout = ch.PolarizationLayout.dp(n, n)
        model = ch.planted_model(
            layout,
            {"VV": float(rng.uniform(0.0, 10.0)), "HH": float(rng.uniform(0.0, 10.0))},
            scatter=_random_scatter(rng, n, n),
            steering_seed=int(rng.integers(0, 2**31)),
        )
        snaps = ch.sample_channels(
            model, 4, int(rng.choice([16, 32, 64])), seed=int(rng.integers(0, 2**31))
        )
        res = dec.decompose(
            est.estimate_moments(snaps), n_dp=int(rng.integers(1, 5)), mode="DP"
        )
        trace = float(np.trace(res.r_tilde).real)
        w_min = float(np.linalg.eigvalsh(res.r_tilde).min())
        if w_min < -1e-10 * trace:
            violations += 1
        if trace > 0.0:
            worst_ratio = max(worst_ratio, -w_min / trace)
    ok = violations == 0
    _verdict(4, ok, f"{violations}/1000 PSD violations (need 0); worst -eig/tr {worst_ratio:.2e}")


def _model_z(model: ch.ChannelModel) -> np.ndarray:
    layout = model.layout
    return mi.z_model(
        ch.analytic_dominant_covariance(model),
        model.scatter.covariance,
        layout.n_tx,
        layout.n_rx,
    )


def test_criterion_5_approximation_quality():
    """Second-order MI stays within 0.2 bits of MC up to 10 dB, degrades beyond."""
    worst_low, worst_se = 0.0, 0.0
    monotone = True
    details = []
    for idx, (mode, k) in enumerate(
        [(m, k) for m in ("SP", "DP") for k in (0.5, 2.0, 8.0)]
    ):
        if mode == "SP":
            layout = ch.PolarizationLayout.sp(4, 4)
            model = ch.planted_model(layout, {"VV": k}, steering_seed=500 + idx)
        else:
            layout = ch.PolarizationLayout.dp(4, 4)
            model = ch.planted_model(layout, {"VV": k, "HH": k}, steering_seed=500 + idx)
        stats = ch.analytic_stats(model)
        z = _model_z(model)
        design = mi.design_input(stats.r_tx, 1.0, policy="equal", n_streams=2)
        snaps = ch.sample_channels(model, 1, 200000, seed=600 + idx)
        gram = mi.gram_eigenvalues(snaps, design)
        gaps = {}
        for db in (0.0, 2.5, 5.0, 7.5, 10.0, 20.0):
            rho = 10.0 ** (db / 10.0)
            per_draw = np.sum(np.log1p(rho * np.maximum(gram, 0.0)), axis=-1) * mi.LOG2E
            exact = float(np.mean(per_draw))
            se = float(np.std(per_draw) / np.sqrt(per_draw.size))
            gaps[db] = abs(mi.mi_approx(rho, design, stats.r_tx, z) - exact)
            worst_se = max(worst_se, se)
            if db <= 10.0:
                worst_low = max(worst_low, gaps[db])
        if gaps[20.0] <= gaps[0.0]:
            monotone = False
        details.append(f"{mode} K={k:g}: gap@10dB {gaps[10.0]:.3f}, gap@20dB {gaps[20.0]:.3f}")
    ok = worst_low <= 0.2 and monotone and worst_se <= 0.01
    _verdict(
        5,
        ok,
        f"worst gap below 10 dB {worst_low:.3f} bits (<= 0.2), "
        f"gap grows 0->20 dB: {monotone}, worst SE {worst_se:.4f} (<= 0.01)",
    )
    for line in details:
        print(f"             {line}")


def test_criterion_6_jensen_tight_at_high_k():
    """At K = 1e3 the Jensen bound matches MC MI within 0.05 bits on the grid."""
    layout = ch.PolarizationLayout.dp(4, 4)
    model = ch.planted_model(layout, {"VV": 1e3, "HH": 1e3}, steering_seed=61)
    stats = ch.analytic_stats(model)
    design = mi.design_input(stats.r_tx, 1.0, policy="equal", n_streams=2)
    snaps = ch.sample_channels(model, 1, 50000, seed=62)
    gram = mi.gram_eigenvalues(snaps, design)
    worst = 0.0
    for db in np.arange(-5.0, 20.1, 2.5):
        rho = 10.0 ** (db / 10.0)
        per_draw = np.sum(np.log1p(rho * np.maximum(gram, 0.0)), axis=-1) * mi.LOG2E
        gap = abs(float(np.mean(per_draw)) - mi.mi_jensen(stats.r_tx, design, rho))
        worst = max(worst, gap)
    ok = worst <= 0.05
    _verdict(6, ok, f"worst |exact - Jensen| {worst:.4f} bits (<= 0.05) over -5..20 dB")


def test_criterion_7_crossing_consistency():
    """Closed-form crossings match numeric curve crossings to 1e-6 dB."""
    spec = cr.CrossingSpec(
        lambda_sp1=5.0, lambda_dp=(2.5, 1.5), lambda_q_dp=(0.5, 0.5),
        w_sp=0.05, w_dp=0.25,
    )

    def jensen_sp(rho):
        return np.log1p(rho * spec.lambda_sp1)

    def jensen_dp(rho):
        return np.log1p(rho * 1.25) + np.log1p(rho * 0.75)

    grid = np.geomspace(1e-3, 1e3, 200)
    num_j = cr.numeric_crossing(jensen_sp, jensen_dp, grid)
    num_l = cr.numeric_crossing(
        lambda r: jensen_sp(r) - spec.w_sp, lambda r: jensen_dp(r) - spec.w_dp, grid
    )
    closed_j = cr.rho_cp_jensen(spec).rho_db
    closed_l = cr.rho_cp_lower_bound(spec).rho_db
    err_j = abs(closed_j - 10.0 * np.log10(num_j[-1])) if num_j else np.inf
    err_l = abs(closed_l - 10.0 * np.log10(num_l[-1])) if num_l else np.inf

    hand = cr.CrossingSpec(lambda_sp1=4.0, lambda_dp=(2.0, 2.0), lambda_q_dp=(0.5, 0.5))
    hand_db = cr.rho_cp_jensen(hand).rho_db
    hand_err = abs(hand_db - 3.0103)
    ok = err_j <= 1e-6 and err_l <= 1e-6 and hand_err <= 1e-4
    _verdict(
        7,
        ok,
        f"Jensen closed-vs-numeric {err_j:.2e} dB, lower-bound {err_l:.2e} dB (<= 1e-6); "
        f"hand case {hand_db:.4f} dB (expect 3.0103)",
    )


def test_criterion_8_crossing_ordering(tmp_path):
    """High-K scenario: Jensen crossing <= numeric <= lower bound, gaps <= 2 dB."""
    hits = 0
    samples = []
    for seed in range(20):
        cfg = preset_config("high-k", seed=3000 + seed, n_regions=1, mc_samples=20000)
        sp_ra = scn.analyze_region(cfg, "VP", 0)
        dp_ra = scn.analyze_region(cfg, "DP", 0)
        jens, low, roots, _flags = scn._region_crossing(cfg, sp_ra, dp_ra, "VP", 0)
        if jens.always_dp or low.always_dp or not roots:
            continue
        j_db, l_db = jens.rho_db, low.rho_db
        n_db = 10.0 * np.log10(roots[-1])
        samples.append((j_db, n_db, l_db))
        if j_db <= n_db <= l_db and n_db - j_db <= 2.0 and l_db - n_db <= 2.0:
            hits += 1
    med = np.median(np.asarray(samples), axis=0) if samples else np.full(3, np.nan)
    ok = hits >= 16
    _verdict(
        8,
        ok,
        f"{hits}/20 seeds ordered with <= 2 dB gaps (need >= 16); "
        f"median (Jensen, numeric, LB) = ({med[0]:.2f}, {med[1]:.2f}, {med[2]:.2f}) dB",
    )


def test_criterion_9_z_cross_validation():
    """Model fourth-order matrix matches the sample one within 5% at 1e6 draws."""
    worst = 0.0
    for idx, (k, r_corr) in enumerate([(1.0, 0.0), (6.0, 0.5)]):
        layout = ch.PolarizationLayout.dp(2, 2)
        scatter = np.kron(_exp_corr(2, r_corr), _exp_corr(2, r_corr / 2.0))
        model = ch.planted_model(
            layout, {"VV": k, "HH": k}, scatter=scatter, steering_seed=900 + idx
        )
        stats = ch.analytic_stats(model)
        snaps = ch.sample_channels(model, 100, 10000, seed=910 + idx)
        z_emp = mi.z_empirical(snaps, stats.r_tx)
        z_mod = _model_z(model)
        err = np.linalg.norm(z_emp - z_mod) / np.linalg.norm(z_mod)
        worst = max(worst, err)

    # scalar Rayleigh reference: var(|h|^2) = 1 for unit-variance CN(0, 1)
    layout1 = ch.PolarizationLayout.sp(1, 1)
    rayleigh = ch.ChannelModel(
        layout1, ch.DominantSpec.empty(), ch.ScatterSpec(np.eye(1, dtype=complex))
    )
    snaps1 = ch.sample_channels(rayleigh, 100, 10000, seed=920)
    z_scalar = float(mi.z_empirical(snaps1, np.eye(1, dtype=complex))[0, 0].real)
    scalar_ok = abs(z_scalar - 1.0) <= 0.02
    ok = worst <= 0.05 and scalar_ok
    _verdict(
        9,
        ok,
        f"worst Z discrepancy {worst:.4f} (<= 0.05); scalar Z {z_scalar:.4f} (1 +- 2%)",
    )


def test_criterion_10_rank_properties():
    """Dominant covariance rank <= 4; SP rank <= 1; co-pol DP TX rank exactly 2."""
    rng = np.random.default_rng(1010)
    violations = 0
    for trial in range(200):
        kind = trial % 3
        if kind == 0:  # SP, any size, single pair
            n_tx, n_rx = int(rng.integers(1, 5)), int(rng.integers(1, 5))
            layout = ch.PolarizationLayout.sp(n_tx, n_rx)
            model = ch.planted_model(
                layout, {"VV": float(rng.uniform(0.5, 10.0))},
                steering_seed=int(rng.integers(0, 2**31)),
            )
        elif kind == 1:  # co-pol-only DP
            model = _random_copol_model(rng, int(rng.choice([2, 4])))
        else:  # DP with all four pairs active
            n = int(rng.choice([2, 4]))
            layout = ch.PolarizationLayout.dp(n, n)
            model = ch.planted_model(
                layout,
                {p: float(rng.uniform(0.5, 10.0)) for p in ch.PAIRS},
                steering_seed=int(rng.integers(0, 2**31)),
            )
        r_bar = ch.analytic_dominant_covariance(model)
        if linalg.numerical_rank(r_bar) > 4:
            violations += 1
        if kind == 0 and linalg.numerical_rank(r_bar) > 1:
            violations += 1
        if kind == 1:
            layout = model.layout
            bar_tx = ch.tx_correlation(r_bar, layout.n_tx, layout.n_rx)
            if linalg.numerical_rank(bar_tx) != 2:
                violations += 1
    ok = violations == 0
    _verdict(10, ok, f"{violations}/200 rank violations (need 0)")


def test_criterion_11_end_to_end_determinism(tmp_path):
    """Scenario reruns are byte-identical; snapshot files round-trip bit-exact."""
    kwargs = dict(n_regions=2, mc_samples=2000, snr_db=(0.0, 10.0, 5.0))
    res_a = scn.run_scenario(preset_config("medium-k", out=str(tmp_path / "a"), **kwargs))
    res_b = scn.run_scenario(preset_config("medium-k", out=str(tmp_path / "b"), **kwargs))
    csv_identical = all(
        a.read_bytes() == b.read_bytes()
        for a, b in (
            (res_a.kfactors_csv, res_b.kfactors_csv),
            (res_a.mi_csv, res_b.mi_csv),
            (res_a.crossings_csv, res_b.crossings_csv),
        )
    )

    model = ch.planted_model(
        ch.PolarizationLayout.dp(4, 4), {"VV": 3.0, "HH": 5.0}, steering_seed=111
    )
    snaps = ch.sample_channels(model, 4, 32, seed=112)
    path = tmp_path / "roundtrip.pms1"
    sio.write_snapshots(snaps, path)
    back = sio.read_snapshots(path)
    path2 = tmp_path / "roundtrip2.pms1"
    sio.write_snapshots(back, path2)
    io_exact = (
        np.array_equal(snaps.snapshots, back.snapshots)
        and back.layout == snaps.layout
        and path.read_bytes() == path2.read_bytes()
    )
    ok = csv_identical and io_exact
    _verdict(
        11,
        ok,
        f"scenario CSVs byte-identical: {csv_identical}; PMS1 round-trip bit-exact: {io_exact}",
    )
