"""Experiment configuration files (TOML).

Example::

    seed = 0
    zone_n = 1.0
    coefficient = { kind = "mu_over_1pt", mu = 0.3 }
    spectral = { kind = "dirichlet_interval", k = 64 }
    data = { kind = "smooth_bump", lo = 0.5, hi = 8.0 }

    [times]
    t_min = 10.0
    t_max = 1e4
    points = 13

    [tolerances]
    integrator = 1e-10
    limit = 1e-9

Everything except ``coefficient`` has a default.  Unknown keys are errors.
"""

from __future__ import annotations

import copy
import hashlib
import json
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

from . import coefficients, spectral
from .errors import ConfigError, DampscatError

DEFAULTS = {
    "seed": 0,
    "threads": 1,
    "zone_n": 1.0,
    "auto_zone": True,
    "gamma": None,
    "epsilon": None,
    "horizon_cap": 1e6,
    "direct_horizon": 1e4,
    "spectral": {"kind": "dirichlet_interval", "k": 16},
    "data": {"kind": "smooth_bump", "lo": 0.5, "hi": 8.0},
    "regime": {},
    "times": {"t_min": 1.0, "t_max": 1e3, "points": 13, "spacing": "log"},
    "tolerances": {"integrator": 1e-10, "limit": 1e-9},
    "classify": {"horizon": 1e6, "grid_size": 200, "tol": 0.05},
    "wave_op": {"with_minus": False, "normalization": None},
    "verify": {
        "levels": 3,
        "lambda_min": 1e-3,
        "n_lambda": 12,
        "n_t": 24,
        "zone_expect": "stable",
        "samples": 20,
        "lambda_range": [0.5, 50.0],
        "t_max": 1e3,
        "rep_threshold": 1e-6,
        "q1_lambdas": [1.0, 5.0],
        "q1_T": [10.0, 1e4],
        "energy_data": 3,
    },
}

_REGIME_KEYS = {"mu_upper", "mu_lower", "mu_plus", "c1", "c2"}


def _merge(base, over, path=""):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in base:
            raise ConfigError(f"unknown config key {path + k!r}")
        if isinstance(base[k], dict) and k not in ("spectral", "data", "regime"):
            if not isinstance(v, dict):
                raise ConfigError(f"config key {path + k!r} must be a table")
            out[k] = _merge(base[k], v, path + k + ".")
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated configuration; ``raw`` is the fully resolved table."""

    raw: dict
    source: Optional[str] = None
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __getattr__(self, name):
        raw = object.__getattribute__(self, "raw")
        if name in raw:
            return raw[name]
        raise AttributeError(name)

    @property
    def tol(self) -> float:
        return float(self.raw["tolerances"]["integrator"])

    @property
    def limit_tol(self) -> float:
        return float(self.raw["tolerances"]["limit"])

    def config_hash(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def with_overrides(self, **kv) -> "ExperimentConfig":
        raw = copy.deepcopy(self.raw)
        for k, v in kv.items():
            if v is not None:
                raw[k] = v
        return validate(raw, self.source)

    # -- builders ---------------------------------------------------------

    def coefficient_model(self) -> coefficients.CoefficientModel:
        if "coeff" not in self._cache:
            spec = dict(self.raw["coefficient"])
            for k in ("mu_upper", "mu_lower", "c1", "c2"):
                if k in self.raw["regime"]:
                    spec[k] = self.raw["regime"][k]
            self._cache["coeff"] = coefficients.from_spec(spec)
        return self._cache["coeff"]

    def spectral_model(self) -> spectral.SpectralModel:
        if "model" not in self._cache:
            spec = dict(self.raw["spectral"])
            self._cache["model"] = spectral.builtin_models(spec.pop("kind"), **spec)
        return self._cache["model"]

    def data_vector(self) -> spectral.DataVector:
        spec = dict(self.raw["data"])
        kind = spec.pop("kind")
        if kind == "random":
            spec.setdefault("seed", self.raw["seed"])
        return spectral.make_data(self.spectral_model(), kind, **spec)

    def time_grid(self) -> np.ndarray:
        t = self.raw["times"]
        if t["spacing"] == "log":
            return np.geomspace(t["t_min"], t["t_max"], int(t["points"]))
        return np.linspace(t["t_min"], t["t_max"], int(t["points"]))

    @property
    def mu_plus(self):
        return self.raw["regime"].get("mu_plus")


def _positive(raw, dotted):
    node = raw
    keys = dotted.split(".")
    for k in keys[:-1]:
        node = node[k]
    v = node[keys[-1]]
    if not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0:
        raise ConfigError(f"{dotted} must be a positive number, got {v!r}")


def validate(raw: dict, source=None) -> ExperimentConfig:
    """Merge ``raw`` over the defaults and check the schema."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a table")
    if "coefficient" not in raw:
        raise ConfigError("config is missing the required 'coefficient' table")
    coeff = raw["coefficient"]
    if not isinstance(coeff, dict) or "kind" not in coeff:
        raise ConfigError("'coefficient' must be a table with a 'kind'")
    rest = {k: v for k, v in raw.items() if k != "coefficient"}
    merged = _merge(DEFAULTS, rest)
    merged["coefficient"] = copy.deepcopy(coeff)
    for key in ("spectral", "data"):
        if not isinstance(merged[key], dict) or "kind" not in merged[key]:
            raise ConfigError(f"'{key}' must be a table with a 'kind'")
    bad = set(merged["regime"]) - _REGIME_KEYS
    if bad:
        raise ConfigError(f"unknown regime keys {sorted(bad)}")
    for dotted in ("tolerances.integrator", "tolerances.limit", "zone_n", "horizon_cap",
                   "classify.horizon", "verify.lambda_min"):
        _positive(merged, dotted)
    t = merged["times"]
    if set(t) - {"t_min", "t_max", "points", "spacing"}:
        raise ConfigError(f"unknown times keys {sorted(set(t) - {'t_min', 't_max', 'points', 'spacing'})}")
    if t["spacing"] not in ("log", "linear"):
        raise ConfigError("times.spacing must be 'log' or 'linear'")
    if not (isinstance(t["points"], int) and t["points"] >= 2):
        raise ConfigError("times.points must be an integer >= 2")
    if not 0 <= t["t_min"] < t["t_max"]:
        raise ConfigError("times need 0 <= t_min < t_max")
    if t["spacing"] == "log" and t["t_min"] <= 0:
        raise ConfigError("log-spaced times need t_min > 0")
    if merged["gamma"] is not None and merged["gamma"] < 0:
        raise ConfigError("gamma must be non-negative")
    if merged["direct_horizon"] is not None and merged["direct_horizon"] <= 0:
        raise ConfigError("direct_horizon must be positive")
    if merged["verify"]["zone_expect"] not in ("stable", "growth"):
        raise ConfigError("verify.zone_expect must be 'stable' or 'growth'")
    if not isinstance(merged["seed"], int) or isinstance(merged["seed"], bool):
        raise ConfigError("seed must be an integer")
    cfg = ExperimentConfig(merged, source)
    try:
        cfg.coefficient_model()
        cfg.spectral_model()
        cfg.data_vector()
    except DampscatError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc
    return cfg


def load_config(path) -> ExperimentConfig:
    """Parse and validate a TOML file."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid TOML: {exc}") from None
    return validate(raw, str(path))
