"""Experiment configuration: flat keys, read from JSON and overridable from the command line."""
from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional, Sequence

MODELS = ("gaussian_rw", "cauchy_independence", "exp_independence", "geometric_rw", "probit")

H_SCALAR = ("x", "x^2", "1{x>0}", "1{x>1}", "p")
H_PROBIT = ("beta1", "beta2", "1{beta2>0.5}", "p")

OUTPUT_ENV = "RBMH_OUTPUT_DIR"


class ConfigError(ValueError):
    pass


def parse_k(v) -> float:
    if isinstance(v, str):
        s = v.strip().lower()
        if s in ("inf", "infinity", "oo"):
            return math.inf
        v = s
    try:
        f = float(v)
    except (TypeError, ValueError):
        raise ConfigError(f"cannot read k={v!r}; use a non-negative integer or 'inf'") from None
    if f == math.inf:
        return math.inf
    if f < 0 or not f.is_integer():
        raise ConfigError(f"k must be a non-negative integer or 'inf', got {v!r}")
    return int(f)


def k_label(k: float) -> str:
    return "inf" if k == math.inf else str(int(k))


@dataclass
class ExperimentConfig:
    model: str = "gaussian_rw"
    scales: Sequence[float] = (2.0,)
    N: int = 100
    R: int = 1000
    k: Sequence[float] = (math.inf,)
    h: Sequence[str] = ("x", "x^2", "1{x>0}", "p")
    seed: Optional[int] = None
    output_dir: Optional[str] = None
    oracle: bool = False
    control_variate: bool = False
    lam: float = 1.0
    data: Optional[str] = None
    data_predictor: str = "bmi"
    data_outcome: str = "type"
    init: object = "target"
    workers: int = 1
    trace: bool = False
    max_proposals: int = 10**6
    product_floor: float = 1e-12
    name: str = "experiment"

    def __post_init__(self):
        self.scales = tuple(float(s) for s in _as_list(self.scales))
        self.k = tuple(parse_k(v) for v in _as_list(self.k))
        self.h = tuple(str(v) for v in _as_list(self.h))
        self.N = int(self.N)
        self.R = int(self.R)
        self.workers = int(self.workers)

    def validate(self) -> "ExperimentConfig":
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}; choose from {', '.join(MODELS)}")
        if self.N < 1:
            raise ConfigError(f"N must be >= 1, got {self.N}")
        if self.R < 1:
            raise ConfigError(f"R must be >= 1, got {self.R}")
        if not self.k:
            raise ConfigError("k-list must not be empty")
        if not self.scales:
            raise ConfigError("need at least one proposal scale")
        if not self.h:
            raise ConfigError("h-list must not be empty")
        allowed = H_PROBIT if self.model == "probit" else H_SCALAR
        bad = [h for h in self.h if h not in allowed]
        if bad:
            raise ConfigError(f"h {bad} not defined for model {self.model!r}; available: {', '.join(allowed)}")
        if self.seed is None:
            raise ConfigError("a seed is required (no wall-clock seeding)")
        if int(self.seed) < 0:
            raise ConfigError("seed must be non-negative")
        if self.oracle and self.model not in ("exp_independence", "geometric_rw"):
            raise ConfigError(f"no exact p(z) available for model {self.model!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        return self

    @property
    def cv_key(self) -> float:
        """Weight used with the control variate: the largest requested ``k``."""
        return max(self.k)

    @property
    def needs_cv_draws(self) -> bool:
        return self.control_variate or "p" in self.h

    def resolved_output_dir(self) -> Path:
        return Path(self.output_dir or os.environ.get(OUTPUT_ENV) or "rbmh-output")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["scales"] = list(self.scales)
        d["k"] = [k_label(k) for k in self.k]
        d["h"] = list(self.h)
        # run-environment keys do not belong to the experiment's identity
        for key in ("output_dir", "workers"):
            d.pop(key)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        names = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - names)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**d)


def _as_list(v):
    if isinstance(v, (str, int, float)):
        if isinstance(v, str) and "," in v:
            return [s for s in v.split(",") if s.strip()]
        return [v]
    return list(v)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror or exc}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a JSON object of flat keys")
    return ExperimentConfig.from_dict(raw)


_T1 = dict(N=100, R=1000, k=("inf",), h=("x", "x^2", "1{x>0}", "p"))

PRESETS = {
    "table1": dict(model="gaussian_rw", scales=(0.1, 2.0, 5.0, 7.0), name="table1", **_T1),
    "table2": dict(model="cauchy_independence", scales=(0.25, 0.5, 1.0, 2.0), name="table2", **_T1),
    "table4": dict(model="exp_independence", scales=(0.9, 0.5, 0.3, 0.1), lam=1.0, oracle=True,
                   N=100, R=1000, k=("inf",), h=("x", "x^2", "1{x>1}", "p"), name="table4"),
    "table5": dict(model="probit", scales=(0.01, 0.05, 0.1, 0.2, 0.5), N=10_000, R=5, k=("inf",),
                   h=("beta1", "beta2", "1{beta2>0.5}"), control_variate=True, init="mle", name="table5"),
    "figure1": dict(model="gaussian_rw", scales=(10.0,), N=1000, R=250, k=("inf",), h=("x",),
                    trace=True, name="figure1"),
    "figure2": dict(model="cauchy_independence", scales=(0.25,), N=1000, R=250, k=("inf",), h=("x",),
                    trace=True, name="figure2"),
    "geometric": dict(model="geometric_rw", scales=(0.174, 0.5), N=1000, R=200, k=(0, 1, 3, "inf"),
                      h=("x", "p"), oracle=True, name="geometric"),
}


def preset(name: str, **overrides) -> ExperimentConfig:
    try:
        d = dict(PRESETS[name])
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}") from None
    d.update(overrides)
    return ExperimentConfig(**d)
