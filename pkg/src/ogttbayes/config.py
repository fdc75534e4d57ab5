"""Run configuration and its JSON serialization."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .dynamics import ModelConstants
from .error_models import CapillaryErrorSpec, VenousErrorSpec
from .priors import PriorSpec
from .twalk import TWalkSettings

__all__ = [
    "SamplerConfig",
    "BandGrid",
    "ConcordanceThresholds",
    "RunConfig",
    "ConfigError",
    "load_config",
    "DEFAULT_QUANTILES",
]

DEFAULT_QUANTILES = (0.025, 0.25, 0.5, 0.75, 0.975)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SamplerConfig:
    iterations: int = 200_000
    burn_fraction: float = 0.2
    seed: int = 0
    tol: float = 1e-6
    g0_jitter: float = 2.0
    twalk: TWalkSettings = TWalkSettings()

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be positive")
        if not 0 <= self.burn_fraction < 1:
            raise ValueError("burn_fraction must lie in [0, 1)")
        if not isinstance(self.seed, (int, np.integer)) or isinstance(self.seed, bool):
            raise ValueError("seed must be an explicit integer")


@dataclass(frozen=True)
class BandGrid:
    t_end: float = 5.0
    step: float = 0.05
    quantiles: tuple = DEFAULT_QUANTILES

    def __post_init__(self):
        if not (self.t_end > 0 and self.step > 0):
            raise ValueError("t_end and step must be positive")
        q = tuple(float(v) for v in self.quantiles)
        if not q or any(not 0 <= v <= 1 for v in q):
            raise ValueError("quantiles must lie in [0, 1]")
        object.__setattr__(self, "quantiles", q)

    def times(self) -> np.ndarray:
        n = int(round(self.t_end / self.step))
        return np.linspace(0.0, n * self.step, n + 1)


@dataclass(frozen=True)
class ConcordanceThresholds:
    min_overlap: float = 0.30
    max_width_ratio: float = 2.5


@dataclass(frozen=True)
class RunConfig:
    constants: ModelConstants = ModelConstants()
    prior: PriorSpec = PriorSpec()
    venous: VenousErrorSpec = VenousErrorSpec()
    capillary: CapillaryErrorSpec = CapillaryErrorSpec()
    sampler: SamplerConfig = SamplerConfig()
    grid: BandGrid = BandGrid()
    thresholds: ConcordanceThresholds = ConcordanceThresholds()
    out_dir: Optional[str] = None
    workers: int = 1

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sampler"]["twalk"]["kernel_probs"] = list(self.sampler.twalk.kernel_probs)
        d["grid"]["quantiles"] = list(self.grid.quantiles)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            kw = {}
            for key, typ in (
                ("constants", ModelConstants),
                ("prior", PriorSpec),
                ("venous", VenousErrorSpec),
                ("capillary", CapillaryErrorSpec),
                ("thresholds", ConcordanceThresholds),
            ):
                if key in d:
                    kw[key] = typ(**d[key])
            if "grid" in d:
                g = dict(d["grid"])
                if "quantiles" in g:
                    g["quantiles"] = tuple(g["quantiles"])
                kw["grid"] = BandGrid(**g)
            if "sampler" in d:
                s = dict(d["sampler"])
                if "twalk" in s:
                    tw = dict(s["twalk"])
                    if "kernel_probs" in tw:
                        tw["kernel_probs"] = tuple(tw["kernel_probs"])
                    s["twalk"] = TWalkSettings(**tw)
                kw["sampler"] = SamplerConfig(**s)
            for key in ("out_dir", "workers"):
                if key in d:
                    kw[key] = d[key]
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        return cls(**kw)

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, sampler=replace(self.sampler, seed=int(seed)))


def load_config(path) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return RunConfig.from_dict(data)
