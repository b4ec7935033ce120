"""End-to-end experiment harness: regions -> moments -> decomposition -> MI tables.

One run covers the three setups VP, HP, DP built from the same per-pair K
targets, emits kfactors.csv / mi_vs_snr.csv / crossings.csv plus a manifest,
and is byte-deterministic in the CSVs given the configuration.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from . import channel as ch
from . import crossing as cr
from . import decomposition as dec
from . import estimation as est
from . import linalg, mi
from .config import ScenarioConfig, config_text
from .errors import ConfigError

SETUP_INDEX = {"VP": 0, "HP": 1, "DP": 2}
_PURPOSE_REGION = 0
_PURPOSE_MC = 1


def format_float(x: float) -> str:
    """Full round-trip float rendering for exact CSV diffing."""
    if isinstance(x, str):
        return x
    if np.isnan(x):
        return "nan"
    if np.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{float(x):.17g}"


def derived_seed(seed: int, region: int, setup: str, purpose: int) -> int:
    ss = np.random.SeedSequence([seed, region, SETUP_INDEX[setup], purpose])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def scatter_covariance(cfg: ScenarioConfig, layout: ch.PolarizationLayout) -> np.ndarray:
    r_tx, r_rx = cfg.scatter_correlations()
    if r_tx == 0.0 and r_rx == 0.0:
        return np.eye(layout.n_links, dtype=complex)

    def expcorr(n, r):
        idx = np.arange(n)
        return np.power(r, np.abs(idx[:, None] - idx[None, :])).astype(complex)

    # vec index t * n_rx + r is TX-major, so the TX factor comes first
    return linalg.kron(expcorr(layout.n_tx, r_tx), expcorr(layout.n_rx, r_rx))


def build_model(cfg: ScenarioConfig, setup: str, region: int) -> ch.ChannelModel:
    targets = cfg.k_targets(region)
    if setup == "VP":
        layout = ch.PolarizationLayout.sp(cfg.n_tx, cfg.n_rx, "V")
        targets = {"VV": targets["VV"]}
    elif setup == "HP":
        layout = ch.PolarizationLayout.sp(cfg.n_tx, cfg.n_rx, "H")
        targets = {"HH": targets["HH"]}
    else:
        layout = ch.PolarizationLayout.dp(cfg.n_tx, cfg.n_rx)
    scatter = scatter_covariance(cfg, layout)
    return ch.planted_model(
        layout,
        targets,
        scatter=scatter,
        coupling=cfg.coupling,
        steering_seed=derived_seed(cfg.seed, region, setup, 7),
    )


def greenstein_kfactors(snapshots: ch.SnapshotSet) -> dict[str, float]:
    """Per-pair average of sub-link moment-method estimates."""
    layout = snapshots.layout
    vecs = snapshots.vectors()
    pairs = layout.link_pairs()
    out: dict[str, float] = {}
    for p, name in enumerate(ch.PAIRS):
        sel = np.flatnonzero(pairs == p)
        if sel.size == 0:
            continue
        ks = [est.moment_method_kfactor(vecs[:, i]) for i in sel]
        out[name] = float(np.mean(ks))
    return out


def _analytic_scale_sq(model: ch.ChannelModel) -> float:
    """Population version of the region normalization: co-polar power = N_co."""
    r = ch.analytic_stats(model).r
    mask = model.layout.copol_mask()
    co_power = float(np.sum(np.diag(r).real[mask]))
    n_co = int(np.count_nonzero(mask))
    if co_power <= 0.0:
        raise ConfigError("model has no co-polarized power; nothing to normalize")
    return n_co / co_power


def _analytic_normalized_stats(model: ch.ChannelModel) -> est.SecondOrderStats:
    s2 = _analytic_scale_sq(model)
    stats = ch.analytic_stats(model)
    return est.SecondOrderStats(
        r=stats.r * s2, r_tx=stats.r_tx * s2, t=stats.t * s2 * s2, sample_count=0
    )


@dataclass(frozen=True)
class RegionAnalysis:
    """Per-setup products of one stationarity region."""

    model: ch.ChannelModel
    stats: est.SecondOrderStats
    result: dec.DecompositionResult
    z: np.ndarray
    k_truth: dict[str, float]
    k_greenstein: dict[str, float]
    k_decomposition: dict[str, float]


def analyze_region(cfg: ScenarioConfig, setup: str, region: int) -> RegionAnalysis:
    model = build_model(cfg, setup, region)
    layout = model.layout
    k_truth = ch.ground_truth_kfactors(model)
    if cfg.analytic:
        stats = _analytic_normalized_stats(model)
        k_green = {name: float("nan") for name in k_truth}
    else:
        snaps = ch.sample_channels(
            model, cfg.n_time, cfg.n_freq,
            seed=derived_seed(cfg.seed, region, setup, _PURPOSE_REGION),
        )
        snaps, _ = est.normalize_region(snaps)
        stats = est.estimate_moments(snaps)
        k_green = greenstein_kfactors(snaps)
    n_dp = 1 if layout.is_sp else cfg.n_dp
    result = dec.decompose(stats, n_dp=n_dp, mode=layout.mode)
    k_dec = dec.decomposition_kfactors(result, layout)
    if cfg.k_vh > 0.0 or cfg.k_hv > 0.0:
        raise ConfigError(
            "cross-polarized dominant power is outside the fourth-order model's "
            "validity; set k_vh = k_hv = 0"
        )
    z = mi.z_model(result.r_bar, result.r_tilde, layout.n_tx, layout.n_rx)
    return RegionAnalysis(
        model=model,
        stats=stats,
        result=result,
        z=z,
        k_truth=k_truth,
        k_greenstein=k_green,
        k_decomposition=k_dec,
    )


def mc_snapshots(cfg: ScenarioConfig, setup: str, region: int, model) -> ch.SnapshotSet:
    snaps = ch.sample_channels(
        model, 1, cfg.mc_samples,
        seed=derived_seed(cfg.seed, region, setup, _PURPOSE_MC),
    )
    # same normalization convention as the region statistics
    scale = np.sqrt(_analytic_scale_sq(model))
    return ch.SnapshotSet(layout=model.layout, snapshots=snaps.snapshots * scale)


def mi_table_rows(
    cfg: ScenarioConfig, analyses: dict[str, list[RegionAnalysis]]
) -> list[list[str]]:
    rows = []
    grid_db = cfg.snr_grid_db()
    for setup in ("VP", "HP", "DP"):
        per_region = analyses[setup]
        n_streams = 2 if setup == "DP" else 1
        acc = {db: {"exact": [], "var": [], "approx": [], "jensen": [], "lb": []}
               for db in grid_db}
        for region, ra in enumerate(per_region):
            snaps = mc_snapshots(cfg, setup, region, ra.model)
            r_tx = ra.stats.r_tx
            fixed_gram = None
            for db in grid_db:
                rho = 10.0 ** (db / 10.0)
                if cfg.policy == "waterfill":
                    design = mi.design_input(r_tx, rho, policy="waterfill")
                    gram = mi.gram_eigenvalues(snaps, design)
                else:
                    design = mi.design_input(
                        r_tx, rho, policy=cfg.policy, n_streams=n_streams
                    )
                    if fixed_gram is None:
                        fixed_gram = mi.gram_eigenvalues(snaps, design)
                    gram = fixed_gram
                per_draw = np.sum(np.log1p(rho * np.maximum(gram, 0.0)), axis=-1)
                per_draw = per_draw * mi.LOG2E
                acc[db]["exact"].append(float(np.mean(per_draw)))
                acc[db]["var"].append(float(np.var(per_draw) / per_draw.size))
                acc[db]["jensen"].append(mi.mi_jensen(r_tx, design, rho))
                acc[db]["approx"].append(mi.mi_approx(rho, design, r_tx, ra.z))
                acc[db]["lb"].append(
                    mi.mi_lower_bound(rho, design, r_tx, ra.z, design.n_streams)
                )
        n = len(per_region)
        for db in grid_db:
            a = acc[db]
            se = float(np.sqrt(np.sum(a["var"])) / n)
            rows.append([
                setup,
                format_float(db),
                format_float(float(np.mean(a["exact"]))),
                format_float(se),
                format_float(float(np.mean(a["approx"]))),
                format_float(float(np.mean(a["jensen"]))),
                format_float(float(np.mean(a["lb"]))),
            ])
    return rows


def _region_crossing(
    cfg: ScenarioConfig,
    sp_ra: RegionAnalysis,
    dp_ra: RegionAnalysis,
    sp_setup: str,
    region: int,
) -> tuple[cr.CrossingResult, cr.CrossingResult, list[float], list[str]]:
    lam_sp = linalg.hermitian_eig(sp_ra.stats.r_tx.conj()).values
    lam_dp = linalg.hermitian_eig(dp_ra.stats.r_tx.conj()).values
    w_sp = mi.lb_penalty(sp_ra.stats.r_tx, sp_ra.z, 1)
    w_dp = mi.lb_penalty(dp_ra.stats.r_tx, dp_ra.z, 2)
    spec = cr.CrossingSpec(
        lambda_sp1=float(lam_sp[0]),
        lambda_dp=(float(lam_dp[0]), float(lam_dp[1])),
        lambda_q_dp=(0.5, 0.5),
        w_sp=w_sp,
        w_dp=w_dp,
    )
    jensen = cr.rho_cp_jensen(spec)
    lower = cr.rho_cp_lower_bound(spec)

    # numeric crossing of the MC curves under the fixed stream designs
    sp_design = mi.design_input(sp_ra.stats.r_tx, 1.0, policy="single_stream")
    dp_design = mi.design_input(dp_ra.stats.r_tx, 1.0, policy="equal", n_streams=2)
    sp_gram = mi.gram_eigenvalues(
        mc_snapshots(cfg, sp_setup, region, sp_ra.model), sp_design
    )
    dp_gram = mi.gram_eigenvalues(
        mc_snapshots(cfg, "DP", region, dp_ra.model), dp_design
    )

    def curve(gram):
        def f(rho):
            return float(np.mean(np.sum(np.log1p(rho * np.maximum(gram, 0.0)), axis=-1)))
        return f

    grid = [10.0 ** (db / 10.0) for db in cfg.snr_grid_db()]
    roots = cr.numeric_crossing(curve(sp_gram), curve(dp_gram), grid)
    flags = []
    if len(roots) > 1:
        flags.append("multiple_numeric")
    if lower.tangency:
        flags.append("tangency")
    return jensen, lower, roots, flags


def crossing_rows(
    cfg: ScenarioConfig, analyses: dict[str, list[RegionAnalysis]]
) -> list[list[str]]:
    rows = []
    n = cfg.n_regions
    for sp_setup in ("VP", "HP"):
        jensen_db, lower_db, numeric_db = [], [], []
        flags: list[str] = []
        for region in range(n):
            jens, low, roots, region_flags = _region_crossing(
                cfg, analyses[sp_setup][region], analyses["DP"][region],
                sp_setup, region,
            )
            for f in region_flags:
                if f not in flags:
                    flags.append(f)
            if not jens.always_dp:
                jensen_db.append(jens.rho_db)
            if not low.always_dp:
                lower_db.append(low.rho_db)
            if roots:
                numeric_db.append(10.0 * np.log10(roots[-1]))

        def cell(values, kind):
            if len(values) == 0:
                return "always_dp"
            if len(values) < n:
                flag = f"{kind}_always_dp:{n - len(values)}/{n}"
                if flag not in flags:
                    flags.append(flag)
            return format_float(float(np.mean(values)))

        rows.append([
            f"{sp_setup}_vs_DP",
            cell(jensen_db, "jensen"),
            cell(lower_db, "lb"),
            cell(numeric_db, "numeric"),
            ";".join(flags) if flags else "ok",
        ])
    return rows


def _write_csv(path: Path, header: list[str], rows: list[list[str]]) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    lines = [",".join(header)] + [",".join(row) for row in rows]
    tmp.write_text("\n".join(lines) + "\n")
    tmp.replace(path)


@dataclass(frozen=True)
class ScenarioResult:
    out_dir: Path
    kfactors_csv: Path
    mi_csv: Path
    crossings_csv: Path
    manifest: Path


def run_scenario(cfg: ScenarioConfig, out_dir: str | Path | None = None) -> ScenarioResult:
    out = Path(out_dir if out_dir is not None else cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from exc

    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    analyses = {
        setup: [analyze_region(cfg, setup, r) for r in range(cfg.n_regions)]
        for setup in ("VP", "HP", "DP")
    }
    timings["analyze_regions_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    k_rows = []
    for region, ra in enumerate(analyses[cfg.setup]):
        for pair in ch.PAIRS:
            if pair not in ra.k_truth:
                continue
            k_rows.append([
                str(region),
                format_float(float(region)),
                pair,
                format_float(ra.k_truth[pair]),
                format_float(ra.k_greenstein[pair]),
                format_float(ra.k_decomposition[pair]),
            ])
    timings["kfactors_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    mi_rows = mi_table_rows(cfg, analyses)
    timings["mi_table_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    cross_rows = crossing_rows(cfg, analyses)
    timings["crossings_s"] = time.perf_counter() - t0

    kfactors_csv = out / "kfactors.csv"
    mi_csv = out / "mi_vs_snr.csv"
    crossings_csv = out / "crossings.csv"
    _write_csv(
        kfactors_csv,
        ["region", "distance_proxy", "pair", "k_truth", "k_greenstein", "k_decomposition"],
        k_rows,
    )
    _write_csv(
        mi_csv,
        ["setup", "snr_db", "mi_exact", "mi_exact_se", "mi_approx", "mi_jensen", "mi_lb"],
        mi_rows,
    )
    _write_csv(
        crossings_csv,
        ["pair_of_setups", "rho_cp_jensen_db", "rho_cp_lb_db", "rho_cp_exact_numeric_db", "flags"],
        cross_rows,
    )

    echo = config_text(cfg)
    manifest_path = out / "manifest.json"
    manifest = {
        "version": __version__,
        "seed": cfg.seed,
        "config": echo,
        "config_sha256": hashlib.sha256(echo.encode()).hexdigest(),
        "timings": timings,
        "outputs": [p.name for p in (kfactors_csv, mi_csv, crossings_csv)],
    }
    tmp = manifest_path.with_suffix(".json.tmp")
    tmp.write_text(json.dumps(manifest, indent=2) + "\n")
    tmp.replace(manifest_path)
    return ScenarioResult(
        out_dir=out,
        kfactors_csv=kfactors_csv,
        mi_csv=mi_csv,
        crossings_csv=crossings_csv,
        manifest=manifest_path,
    )
