"""Render figures from a finished scenario run.

Reads the delimited outputs of run_scenario and writes PNG files next to them:
an MI-versus-SNR comparison per setup and a K-factor summary per region.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import ConfigError

_MI_STYLES = [
    ("mi_exact", "exact (MC)", "o-"),
    ("mi_approx", "2nd-order approx", "s--"),
    ("mi_jensen", "Jensen bound", "^:"),
    ("mi_lb", "high-SNR lower bound", "v-."),
]


def _read_csv(path: Path) -> list[dict[str, str]]:
    if not path.exists():
        raise ConfigError(f"missing scenario output {path}")
    with path.open(newline="") as fh:
        return list(csv.DictReader(fh))


def render_mi_figure(run_dir: Path, out_path: Path) -> Path:
    rows = _read_csv(run_dir / "mi_vs_snr.csv")
    setups = sorted({r["setup"] for r in rows}, key=lambda s: ("VP", "HP", "DP").index(s))
    fig, axes = plt.subplots(1, len(setups), figsize=(4.5 * len(setups), 3.8), sharey=True)
    if len(setups) == 1:
        axes = [axes]
    for ax, setup in zip(axes, setups):
        sub = [r for r in rows if r["setup"] == setup]
        snr = np.array([float(r["snr_db"]) for r in sub])
        order = np.argsort(snr)
        for key, label, style in _MI_STYLES:
            vals = np.array([float(r[key]) for r in sub])[order]
            ax.plot(snr[order], vals, style, label=label, markersize=4)
        se = np.array([float(r["mi_exact_se"]) for r in sub])[order]
        exact = np.array([float(r["mi_exact"]) for r in sub])[order]
        ax.fill_between(snr[order], exact - 2 * se, exact + 2 * se, alpha=0.2)
        ax.set_title(setup)
        ax.set_xlabel("SNR (dB)")
        ax.grid(True, alpha=0.3)
    axes[0].set_ylabel("MI (bits)")
    axes[-1].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def render_kfactor_figure(run_dir: Path, out_path: Path) -> Path:
    rows = _read_csv(run_dir / "kfactors.csv")
    pairs = sorted({r["pair"] for r in rows})
    fig, ax = plt.subplots(figsize=(6.0, 3.8))
    markers = {"k_truth": "k-", "k_greenstein": "o--", "k_decomposition": "s:"}
    for pair in pairs:
        sub = sorted((r for r in rows if r["pair"] == pair), key=lambda r: int(r["region"]))
        regions = [int(r["region"]) for r in sub]
        for col, style in markers.items():
            vals = [float(r[col]) for r in sub]
            if all(np.isnan(v) for v in vals):
                continue
            label = f"{pair} {col.removeprefix('k_')}"
            ax.plot(regions, vals, style, label=label, markersize=4, alpha=0.8)
    ax.set_xlabel("region (distance proxy)")
    ax.set_ylabel("K-factor")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def render_report(run_dir: str | Path) -> list[Path]:
    """Write mi_vs_snr.png and kfactors.png next to the CSVs; returns the paths."""
    run_dir = Path(run_dir)
    return [
        render_mi_figure(run_dir, run_dir / "mi_vs_snr.png"),
        render_kfactor_figure(run_dir, run_dir / "kfactors.png"),
    ]
