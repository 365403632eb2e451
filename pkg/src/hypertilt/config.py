"""Run configuration in laboratory units and its conversion to SI probes.

Config files are flat ``key = value`` text; ``#`` starts a comment.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from .model import CountModel
from .probe import ProbeConfig, make_probe, wavenumber_from_nm

MM = 1e-3
MM2 = 1e-6
URAD = 1e-6

FORMATS = ("csv", "json", "svg")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    # probe, defaults are the d ~ 6 mm photon-pair experiment
    n: int = 2
    lambda_nm: float = 650.0
    d_mm: float = 5.97
    sigma2_mm2: float = 0.70
    cov_mm2: float = 0.52
    visibility: float = 0.77
    # sweep
    theta_min_urad: float = -50.0
    theta_max_urad: float = 50.0
    points: int = 201
    # simulation
    trials: int = 10_000
    replications: int = 1000
    seed: int = 0
    count_model: str | None = None  # per command: exact for scan, binomial for simulate
    theta_urad: float | None = None  # operating point; quarter fringe when unset
    # scaling
    n_max: int = 10
    cov_rule: str = "both"
    # fit-derived Fisher report
    sigma2_single_mm2: float | None = None
    # output
    format: str | None = None  # per command: csv for tables, json for records
    out: str | None = None

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            kind = f.type if isinstance(f.type, str) else f.type.__name__
            try:
                if kind.startswith("int"):
                    as_float = float(value)
                    if as_float != int(as_float):
                        raise ValueError
                    value = int(as_float)
                elif kind.startswith("float"):
                    value = float(value)
                    if not math.isfinite(value):
                        raise ValueError
                else:
                    value = str(value)
            except (TypeError, ValueError):
                raise ConfigError(f"{f.name}: cannot interpret {value!r} as {kind.split(' ')[0]}") from None
            object.__setattr__(self, f.name, value)
        if self.format is not None and self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}, got {self.format!r}")
        try:
            if self.count_model is not None:
                CountModel(self.count_model)
        except ValueError:
            raise ConfigError(f"unknown count_model {self.count_model!r}") from None
        if self.cov_rule not in ("max", "zero", "both", "template"):
            raise ConfigError(f"unknown cov_rule {self.cov_rule!r}")
        if self.points < 1:
            raise ConfigError("points must be >= 1")
        if self.points > 1 and not self.theta_min_urad < self.theta_max_urad:
            raise ConfigError("theta_min_urad must be smaller than theta_max_urad")
        if self.trials < 1 or self.replications < 1:
            raise ConfigError("trials and replications must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")

    @property
    def wavenumber(self) -> float:
        return wavenumber_from_nm(self.lambda_nm)

    def probe(self) -> ProbeConfig:
        return make_probe(
            self.n,
            self.wavenumber,
            self.d_mm * MM,
            self.sigma2_mm2 * MM2,
            self.cov_mm2 * MM2,
            self.visibility,
        )

    def theta_grid(self) -> np.ndarray:
        if self.points == 1:
            return np.array([self.theta_min_urad * URAD])
        return np.linspace(self.theta_min_urad, self.theta_max_urad, self.points) * URAD

    def digest(self, extra: str = "") -> str:
        """SHA-256 over every setting that affects numeric output (plus ``extra``, e.g. an input hash)."""
        data = {k: v for k, v in asdict(self).items() if k not in ("out", "format")}
        data["extra"] = extra
        return hashlib.sha256(json.dumps(data, sort_keys=True).encode()).hexdigest()

    def updated(self, **changes) -> "RunConfig":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})


KEYS = tuple(f.name for f in fields(RunConfig))


def parse_config_text(text: str, source: str = "<config>") -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        values[key] = value
    return values


def load_config(path: str | Path | None = None, **overrides) -> RunConfig:
    values = {}
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {p}: {exc.strerror}") from None
        values.update(parse_config_text(text, str(p)))
    values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**values)
