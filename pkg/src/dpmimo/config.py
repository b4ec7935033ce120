"""Flat key=value scenario configuration with named presets.

One `key = value` per line, `#` starts a comment. Unknown keys, bad values,
and broken invariants raise ConfigError with the offending line number.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ConfigError

SETUPS = ("VP", "HP", "DP")
COUPLINGS = ("shared", "independent", "copol-independent")
POLICIES = ("waterfill", "equal", "single_stream")


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything run_scenario needs; defaults mirror the medium-K archetype."""

    setup: str = "DP"
    n_tx: int = 4
    n_rx: int = 4
    k_vv: float = 0.0
    k_vh: float = 0.0
    k_hv: float = 0.0
    k_hh: float = 0.0
    # optional alternate co-pol targets used on odd region indices
    k_vv_alt: float | None = None
    k_hh_alt: float | None = None
    scatter: str = "identity"
    coupling: str = "copol-independent"
    n_regions: int = 4
    n_time: int = 16
    n_freq: int = 128
    snr_db: tuple[float, float, float] = (-5.0, 20.0, 2.5)
    mc_samples: int = 20000
    seed: int = 1234
    n_dp: int = 2
    policy: str = "waterfill"
    analytic: bool = False
    out: str = "scenario_out"

    def __post_init__(self):
        if self.setup not in SETUPS:
            raise ConfigError(f"setup must be one of {SETUPS}, got {self.setup!r}")
        if self.n_tx < 1 or self.n_rx < 1:
            raise ConfigError("antenna counts must be positive")
        if self.n_tx % 2 or self.n_rx % 2:
            raise ConfigError("antenna counts must be even (DP needs a V/H split)")
        for name in ("k_vv", "k_vh", "k_hv", "k_hh"):
            if getattr(self, name) < 0.0:
                raise ConfigError(f"{name} must be non-negative")
        for name in ("k_vv_alt", "k_hh_alt"):
            v = getattr(self, name)
            if v is not None and v < 0.0:
                raise ConfigError(f"{name} must be non-negative")
        if self.coupling not in COUPLINGS:
            raise ConfigError(f"coupling must be one of {COUPLINGS}")
        if not (self.scatter == "identity" or self.scatter.startswith("exp:")):
            raise ConfigError(
                f"scatter must be 'identity' or 'exp:<r_tx>,<r_rx>', got {self.scatter!r}"
            )
        if self.scatter.startswith("exp:"):
            self.scatter_correlations()  # validate eagerly
        if self.n_regions < 1:
            raise ConfigError("n_regions must be positive")
        if self.n_time < 1 or self.n_freq < 1 or self.n_time * self.n_freq < 2:
            raise ConfigError("region window must contain at least two snapshots")
        start, stop, step = self.snr_db
        if step <= 0.0 or stop < start:
            raise ConfigError("snr_db grid needs stop >= start and step > 0")
        if len(self.snr_grid_db()) < 2:
            raise ConfigError("snr_db grid must contain at least two points")
        if self.mc_samples < 2:
            raise ConfigError("mc_samples must be at least 2")
        if not 1 <= self.n_dp <= 4:
            raise ConfigError("n_dp must be in 1..4")
        if self.policy not in POLICIES:
            raise ConfigError(f"policy must be one of {POLICIES}")

    def snr_grid_db(self) -> list[float]:
        start, stop, step = self.snr_db
        out = []
        k = 0
        while True:
            v = start + k * step
            if v > stop + 1e-9:
                break
            out.append(v)
            k += 1
        return out

    def scatter_correlations(self) -> tuple[float, float]:
        """(r_tx, r_rx) of the exponential-correlation recipe; (0,0) for identity."""
        if self.scatter == "identity":
            return (0.0, 0.0)
        body = self.scatter[len("exp:"):]
        parts = body.split(",")
        try:
            r_tx, r_rx = (float(p) for p in parts)
        except ValueError:
            raise ConfigError(f"bad scatter recipe {self.scatter!r}") from None
        if not (0.0 <= abs(r_tx) < 1.0 and 0.0 <= abs(r_rx) < 1.0):
            raise ConfigError("scatter correlations must have magnitude below 1")
        return (r_tx, r_rx)

    def k_targets(self, region: int) -> dict[str, float]:
        """Per-pair K targets for one region (alternate values on odd regions)."""
        k_vv, k_hh = self.k_vv, self.k_hh
        if region % 2 == 1:
            if self.k_vv_alt is not None:
                k_vv = self.k_vv_alt
            if self.k_hh_alt is not None:
                k_hh = self.k_hh_alt
        return {"VV": k_vv, "VH": self.k_vh, "HV": self.k_hv, "HH": k_hh}


PRESETS: dict[str, dict[str, object]] = {
    # synthetic stand-ins for the qualitative link classes, not measured values
    "low-k": {"k_vv": 0.5, "k_hh": 0.4},
    "medium-k": {"k_vv": 6.0, "k_hh": 6.0},
    "high-k": {"k_vv": 8.0, "k_hh": 8.0},
    "varying-k": {"k_vv": 0.5, "k_hh": 0.5, "k_vv_alt": 8.0, "k_hh_alt": 8.0},
}

_INT_KEYS = {"n_tx", "n_rx", "n_regions", "n_time", "n_freq", "mc_samples", "seed", "n_dp"}
_FLOAT_KEYS = {"k_vv", "k_vh", "k_hv", "k_hh", "k_vv_alt", "k_hh_alt"}
_STR_KEYS = {"setup", "scatter", "coupling", "policy", "out"}
_BOOL_KEYS = {"analytic"}


def preset_config(name: str, **overrides) -> ScenarioConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    merged = dict(PRESETS[name])
    merged.update(overrides)
    return ScenarioConfig(**merged)


def _parse_snr(value: str, lineno: int) -> tuple[float, float, float]:
    parts = value.split(":")
    if len(parts) != 3:
        raise ConfigError(f"snr_db must be start:stop:step, got {value!r}", line=lineno)
    try:
        return tuple(float(p) for p in parts)  # type: ignore[return-value]
    except ValueError:
        raise ConfigError(f"non-numeric snr_db field in {value!r}", line=lineno) from None


def parse_config_text(text: str) -> ScenarioConfig:
    values: dict[str, object] = {}
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key in seen:
            raise ConfigError(f"duplicate key {key!r}", line=lineno)
        seen.add(key)
        if key == "preset":
            if values:
                raise ConfigError("preset must be the first key", line=lineno)
            if value not in PRESETS:
                raise ConfigError(f"unknown preset {value!r}", line=lineno)
            values.update(PRESETS[value])
        elif key == "snr_db":
            values[key] = _parse_snr(value, lineno)
        elif key in _INT_KEYS:
            try:
                values[key] = int(value)
            except ValueError:
                raise ConfigError(f"{key} must be an integer, got {value!r}", line=lineno) from None
        elif key in _FLOAT_KEYS:
            try:
                values[key] = float(value)
            except ValueError:
                raise ConfigError(f"{key} must be a number, got {value!r}", line=lineno) from None
        elif key in _BOOL_KEYS:
            if value.lower() not in ("true", "false", "0", "1"):
                raise ConfigError(f"{key} must be true/false, got {value!r}", line=lineno)
            values[key] = value.lower() in ("true", "1")
        elif key in _STR_KEYS:
            values[key] = value
        else:
            raise ConfigError(f"unknown key {key!r}", line=lineno)
    try:
        return ScenarioConfig(**values)  # type: ignore[arg-type]
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return parse_config_text(text)


def config_text(cfg: ScenarioConfig) -> str:
    """Canonical key=value rendering (used for the manifest echo and hashing)."""
    lines = []
    for name in (
        "setup", "n_tx", "n_rx", "k_vv", "k_vh", "k_hv", "k_hh", "k_vv_alt",
        "k_hh_alt", "scatter", "coupling", "n_regions", "n_time", "n_freq",
        "snr_db", "mc_samples", "seed", "n_dp", "policy", "analytic", "out",
    ):
        v = getattr(cfg, name)
        if v is None:
            continue
        if name == "snr_db":
            v = f"{v[0]:.17g}:{v[1]:.17g}:{v[2]:.17g}"
        elif isinstance(v, bool):
            v = "true" if v else "false"
        elif isinstance(v, float):
            v = f"{v:.17g}"
        lines.append(f"{name} = {v}")
    return "\n".join(lines) + "\n"


def with_overrides(cfg: ScenarioConfig, **overrides) -> ScenarioConfig:
    clean = {k: v for k, v in overrides.items() if v is not None}
    return replace(cfg, **clean) if clean else cfg
