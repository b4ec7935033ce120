"""Command-line front end.

Subcommands: generate (sample one region to a PMS1 file), decompose (K-factors
from a PMS1 file), mi (MI table for the configured setup), cross (SP-vs-DP
crossing table), scenario (full run), report (figures from a finished run).
Exit codes: 0 ok, 2 configuration error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import channel as ch
from . import decomposition as dec
from . import estimation as est
from . import mi as mi_engine
from . import scenario as scn
from . import snapshot_io as sio
from .config import ScenarioConfig, load_config, preset_config, with_overrides
from .errors import (
    ConfigError,
    CurveEvaluationError,
    DegenerateInputError,
    NotPositiveSemidefiniteError,
    SnapshotFormatError,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

_POLICY_ALIASES = {"waterfill": "waterfill", "equal": "equal", "single": "single_stream"}


def _parse_snr_triple(text: str) -> tuple[float, float, float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"--snr-db must be start:stop:step, got {text!r}")
    try:
        return tuple(float(p) for p in parts)  # type: ignore[return-value]
    except ValueError:
        raise ConfigError(f"non-numeric --snr-db field in {text!r}") from None


def _build_config(args: argparse.Namespace) -> ScenarioConfig:
    if args.config is not None and args.preset is not None:
        raise ConfigError("use either --config or --preset, not both")
    if args.config is not None:
        cfg = load_config(args.config)
    elif args.preset is not None:
        cfg = preset_config(args.preset)
    else:
        cfg = ScenarioConfig()
    overrides = {
        "seed": args.seed,
        "mc_samples": args.mc_samples,
        "n_dp": args.ndp,
        "policy": _POLICY_ALIASES[args.policy] if args.policy else None,
        "snr_db": _parse_snr_triple(args.snr_db) if args.snr_db else None,
    }
    if getattr(args, "analytic", False):
        overrides["analytic"] = True
    return with_overrides(cfg, **overrides)


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _cmd_generate(args) -> int:
    cfg = _build_config(args)
    model = scn.build_model(cfg, cfg.setup, region=args.region)
    snaps = ch.sample_channels(
        model, cfg.n_time, cfg.n_freq,
        seed=scn.derived_seed(cfg.seed, args.region, cfg.setup, 0),
    )
    out = args.out or "snapshots.pms1"
    sio.write_snapshots(snaps, out)
    print(f"wrote {snaps.count} snapshots ({cfg.setup}, region {args.region}) to {out}")
    return EXIT_OK


def _cmd_decompose(args) -> int:
    cfg = _build_config(args)
    snaps = sio.read_snapshots(args.infile)
    snaps, _ = est.normalize_region(snaps)
    stats = est.estimate_moments(snaps)
    layout = snaps.layout
    n_dp = 1 if layout.is_sp else cfg.n_dp
    result = dec.decompose(stats, n_dp=n_dp, mode=layout.mode)
    k_dec = dec.decomposition_kfactors(result, layout)
    k_green = scn.greenstein_kfactors(snaps)
    lines = ["pair,k_greenstein,k_decomposition"]
    for pair in ch.PAIRS:
        if pair in k_dec:
            lines.append(f"{pair},{scn.format_float(k_green[pair])},{scn.format_float(k_dec[pair])}")
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def _cmd_mi(args) -> int:
    cfg = _build_config(args)
    ra = scn.analyze_region(cfg, cfg.setup, region=args.region)
    snaps = scn.mc_snapshots(cfg, cfg.setup, args.region, ra.model)
    r_tx = ra.stats.r_tx
    n_streams = 2 if cfg.setup == "DP" else 1
    lines = ["snr_db,mi_exact,mi_exact_se,mi_approx,mi_jensen,mi_lb"]
    for db in cfg.snr_grid_db():
        rho = 10.0 ** (db / 10.0)
        if cfg.policy == "waterfill":
            design = mi_engine.design_input(r_tx, rho, policy="waterfill")
        else:
            design = mi_engine.design_input(
                r_tx, rho, policy=cfg.policy, n_streams=n_streams
            )
        exact, se = mi_engine.mi_exact_se(snaps, design, rho)
        vals = [
            db,
            exact,
            se,
            mi_engine.mi_approx(rho, design, r_tx, ra.z),
            mi_engine.mi_jensen(r_tx, design, rho),
            mi_engine.mi_lower_bound(rho, design, r_tx, ra.z, design.n_streams),
        ]
        lines.append(",".join(scn.format_float(v) for v in vals))
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def _cmd_cross(args) -> int:
    cfg = _build_config(args)
    analyses = {
        setup: [scn.analyze_region(cfg, setup, r) for r in range(cfg.n_regions)]
        for setup in ("VP", "HP", "DP")
    }
    rows = scn.crossing_rows(cfg, analyses)
    header = "pair_of_setups,rho_cp_jensen_db,rho_cp_lb_db,rho_cp_exact_numeric_db,flags"
    _emit("\n".join([header] + [",".join(r) for r in rows]) + "\n", args.out)
    return EXIT_OK


def _cmd_scenario(args) -> int:
    cfg = _build_config(args)
    result = scn.run_scenario(cfg, out_dir=args.out)
    print(f"scenario outputs written to {result.out_dir}")
    return EXIT_OK


def _cmd_report(args) -> int:
    from . import report

    paths = report.render_report(args.run_dir)
    for p in paths:
        print(f"wrote {p}")
    return EXIT_OK


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value configuration file")
    p.add_argument("--preset", help="named preset (low-k, medium-k, high-k, varying-k)")
    p.add_argument("--seed", type=int, help="RNG seed override")
    p.add_argument("--mc-samples", type=int, dest="mc_samples", help="MC draw budget")
    p.add_argument("--ndp", type=int, help="retained dominant eigenvalues (DP)")
    p.add_argument("--policy", choices=sorted(_POLICY_ALIASES), help="input power policy")
    p.add_argument("--snr-db", dest="snr_db", help="SNR grid start:stop:step in dB")
    p.add_argument("--analytic", action="store_true", help="use analytic moments, skip estimation")
    p.add_argument("--out", help="output path (file or directory by subcommand)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dpmimo",
        description="Dual-/single-polarized Ricean MIMO channel analysis harness",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="sample one region and write a PMS1 file")
    _add_model_flags(p)
    p.add_argument("--region", type=int, default=0, help="region index (default 0)")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("decompose", help="K-factors from a PMS1 snapshot file")
    _add_model_flags(p)
    p.add_argument("infile", help="PMS1 snapshot file")
    p.set_defaults(func=_cmd_decompose)

    p = sub.add_parser("mi", help="MI table for the configured setup")
    _add_model_flags(p)
    p.add_argument("--region", type=int, default=0, help="region index (default 0)")
    p.set_defaults(func=_cmd_mi)

    p = sub.add_parser("cross", help="SP-vs-DP crossing-point table")
    _add_model_flags(p)
    p.set_defaults(func=_cmd_cross)

    p = sub.add_parser("scenario", help="full multi-region run with CSV outputs")
    _add_model_flags(p)
    p.set_defaults(func=_cmd_scenario)

    p = sub.add_parser("report", help="render figures from a finished scenario run")
    p.add_argument("run_dir", help="directory holding the scenario CSVs")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SnapshotFormatError, DegenerateInputError, FileNotFoundError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NotPositiveSemidefiniteError, CurveEvaluationError, FloatingPointError,
            np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
