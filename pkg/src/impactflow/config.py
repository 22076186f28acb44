"""Run configuration: JSON schema, validation, canonical round-trip.

The config document is flat JSON.  Model keys mirror `ModelParams` (the
duration-slope field is spelled ``lambda`` in JSON); run keys control
horizons, grids, window caps, and output conventions.  Unknown keys are
rejected with the offending key path in the message.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

from .errors import ConfigurationError
from .params import ModelParams
from .tapeio import atomic_write_text

# JSON key -> ModelParams attribute
_MODEL_KEYS = {
    "nu": "nu",
    "phi_child": "phi_child",
    "s0": "s0",
    "mu1": "mu1",
    "lambda": "lam",
    "m_logq": "m_logq",
    "sigma_logq": "sigma_logq",
    "gamma_cross": "gamma_cross",
    "Gamma_amp": "Gamma_amp",
    "beta1": "beta1",
    "lambda_prime": "lambda_prime",
    "n0": "n0",
    "theta0": "theta0",
    "z_inf": "z_inf",
    "sigma_F": "sigma_F",
    "rho": "rho",
    "psi": "psi",
    "seed": "seed",
    "mode": "mode",
    "mu_floor": "mu_floor",
}

_RUN_DEFAULTS = {
    "horizon_trades": 1_000_000,
    "n_realizations": 4,
    "T_grid": [int(round(16 * 2 ** (k / 2))) for k in range(21)],  # 16 .. 16384, ratio sqrt(2)
    "a_grid": [round(0.25 * k, 2) for k in range(13)],             # 0 .. 3 step 0.25
    "fit_range": [100, 1000],
    "n_realizations_max_windows": 1024,
    "clip_fraction": 0.01,
    "day_block": 10_000,
    "n_autocorr_bins": 5,
}


@dataclass
class RunConfig:
    """Model parameters plus analysis grids and run-control settings."""

    params: ModelParams = field(default_factory=ModelParams)
    horizon_trades: int = _RUN_DEFAULTS["horizon_trades"]
    n_realizations: int = _RUN_DEFAULTS["n_realizations"]
    T_grid: list = field(default_factory=lambda: list(_RUN_DEFAULTS["T_grid"]))
    a_grid: list = field(default_factory=lambda: list(_RUN_DEFAULTS["a_grid"]))
    fit_range: list = field(default_factory=lambda: list(_RUN_DEFAULTS["fit_range"]))
    max_windows: int = _RUN_DEFAULTS["n_realizations_max_windows"]
    clip_fraction: float = _RUN_DEFAULTS["clip_fraction"]
    day_block: int = _RUN_DEFAULTS["day_block"]
    n_autocorr_bins: int = _RUN_DEFAULTS["n_autocorr_bins"]

    def validate(self) -> None:
        if self.horizon_trades < 1:
            raise ConfigurationError("horizon_trades must be >= 1")
        if self.n_realizations < 1:
            raise ConfigurationError("n_realizations must be >= 1")
        for name, grid in (("T_grid", self.T_grid), ("a_grid", self.a_grid)):
            if len(grid) == 0:
                raise ConfigurationError(f"{name} must be non-empty")
            if any(b <= a for a, b in zip(grid, grid[1:])):
                raise ConfigurationError(f"{name} must be strictly increasing")
        if len(self.fit_range) != 2 or not (0 < self.fit_range[0] < self.fit_range[1]):
            raise ConfigurationError("fit_range must be [lo, hi] with 0 < lo < hi")
        if not (0.0 < self.clip_fraction <= 1.0):
            raise ConfigurationError("clip_fraction must be in (0, 1]")
        if self.day_block < 1:
            raise ConfigurationError("day_block must be >= 1")
        if self.n_autocorr_bins < 2:
            raise ConfigurationError("n_autocorr_bins must be >= 2")
        if self.max_windows < 4:
            raise ConfigurationError("max_windows must be >= 4")

    # -- canonical JSON --------------------------------------------------

    def to_json_dict(self) -> dict:
        d: dict = {}
        for jkey, attr in _MODEL_KEYS.items():
            d[jkey] = getattr(self.params, attr)
        d.update(
            horizon_trades=self.horizon_trades,
            n_realizations=self.n_realizations,
            T_grid=list(self.T_grid),
            a_grid=list(self.a_grid),
            fit_range=list(self.fit_range),
            max_windows=self.max_windows,
            clip_fraction=self.clip_fraction,
            day_block=self.day_block,
            n_autocorr_bins=self.n_autocorr_bins,
        )
        return d

    def canonical_text(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"

    def content_hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()[:16]


def config_from_dict(doc: dict, source: str = "<config>") -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigurationError(f"{source}: top level must be a JSON object")
    known_run = set(_RUN_DEFAULTS) | {"max_windows"}
    model_kwargs = {}
    run_kwargs = {}
    for key, value in doc.items():
        if key in _MODEL_KEYS:
            model_kwargs[_MODEL_KEYS[key]] = value
        elif key == "max_windows" or key == "n_realizations_max_windows":
            run_kwargs["max_windows"] = value
        elif key in known_run:
            run_kwargs[key] = value
        else:
            raise ConfigurationError(f"{source}: unknown key {key!r}")
    try:
        params = ModelParams(**model_kwargs)
    except TypeError as exc:
        raise ConfigurationError(f"{source}: {exc}") from exc
    except ConfigurationError as exc:
        raise ConfigurationError(f"{source}: {exc}") from exc
    cfg = RunConfig(params=params, **{k: v for k, v in run_kwargs.items()})
    cfg.validate()
    return cfg


def read_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON: {exc}") from exc
    return config_from_dict(doc, source=str(path))


def write_config(cfg: RunConfig, path: str | Path) -> None:
    cfg.validate()
    atomic_write_text(path, cfg.canonical_text())


def default_config() -> RunConfig:
    return RunConfig()
