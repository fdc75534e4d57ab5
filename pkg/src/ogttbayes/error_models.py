"""Measurement error models for venous and capillary glucose readings.

Venous lab readings carry a scaled Student-t error; capillary glucometer
readings carry a per-test gamma-distributed positive bias plus Gaussian
noise. The estimators at the bottom recover the error parameters from
calibration data (duplicate venous assays; paired capillary/venous readings).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass
from typing import Mapping, Sequence

import numpy as np

from .priors import gamma_logpdf

__all__ = [
    "VenousErrorSpec",
    "CapillaryErrorSpec",
    "DegenerateDataError",
    "venous_loglik",
    "capillary_loglik",
    "bias_log_prior",
    "estimate_duplicate_sd",
    "fit_capillary_error",
]

_NOISE_VAR_FLOOR = 1e-12


class DegenerateDataError(ValueError):
    """Calibration data cannot identify positive error-model parameters."""


@dataclass(frozen=True)
class VenousErrorSpec:
    sigma: float = 2.2
    dof: float = 4.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not self.dof > 2:
            raise ValueError("dof must exceed 2 for a finite error variance")

    @property
    def implied_sd(self) -> float:
        """Standard deviation of the scaled-t error, sigma * sqrt(dof / (dof - 2))."""
        return self.sigma * math.sqrt(self.dof / (self.dof - 2.0))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "VenousErrorSpec":
        return cls(**d)


@dataclass(frozen=True)
class CapillaryErrorSpec:
    bias_shape: float = 0.4
    bias_scale: float = 4.3
    noise_var: float = 100.0

    def __post_init__(self):
        for name in ("bias_shape", "bias_scale", "noise_var"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def bias_mean(self) -> float:
        return self.bias_shape * self.bias_scale

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "CapillaryErrorSpec":
        return cls(**d)


def _paired(predicted, observed) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(predicted, dtype=np.float64)
    obs = np.asarray(observed, dtype=np.float64)
    if pred.shape != obs.shape:
        raise ValueError(f"length mismatch: {pred.shape} predictions vs {obs.shape} observations")
    return pred, obs


def t_logpdf_const(dof: float) -> float:
    return math.lgamma(0.5 * (dof + 1.0)) - math.lgamma(0.5 * dof) - 0.5 * math.log(dof * math.pi)


def venous_loglik(predicted, observed, spec: VenousErrorSpec = VenousErrorSpec()) -> float:
    """Sum of scaled Student-t log densities of the residuals."""
    pred, obs = _paired(predicted, observed)
    z = (obs - pred) / spec.sigma
    nu = spec.dof
    n = z.size
    return float(
        n * (t_logpdf_const(nu) - math.log(spec.sigma))
        - 0.5 * (nu + 1.0) * np.log1p(z * z / nu).sum()
    )


def capillary_loglik(
    predicted, observed, bias: float, spec: CapillaryErrorSpec = CapillaryErrorSpec()
) -> float:
    """Gaussian log-likelihood of ``observed - predicted - bias``.

    The bias is shared by every reading of the test.
    """
    pred, obs = _paired(predicted, observed)
    r = obs - pred - bias
    var = spec.noise_var
    return float(-0.5 * (r.size * math.log(2.0 * math.pi * var) + (r * r).sum() / var))


def bias_log_prior(bias: float, spec: CapillaryErrorSpec = CapillaryErrorSpec()) -> float:
    return gamma_logpdf(bias, spec.bias_shape, spec.bias_scale)


def estimate_duplicate_sd(pairs: Sequence[tuple[float, float]]) -> float:
    """Per-measurement sd from duplicate assays of the same samples.

    Each within-pair difference carries two independent errors, so the sample
    sd of the differences is divided by sqrt(2).
    """
    arr = np.asarray(pairs, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("pairs must be a sequence of (first, second) readings")
    if arr.shape[0] < 2:
        raise ValueError("need at least 2 duplicate pairs")
    diffs = arr[:, 0] - arr[:, 1]
    return float(np.std(diffs, ddof=1) / math.sqrt(2.0))


def fit_capillary_error(
    paired_diffs: Mapping[str, Sequence[float]] | Sequence[Sequence[float]],
) -> CapillaryErrorSpec:
    """Method-of-moments fit of the capillary error model.

    ``paired_diffs`` holds capillary-minus-venous differences grouped by
    patient. The pooled within-patient variance estimates the noise variance.
    The spread of per-patient means, less the noise contribution, estimates the
    bias variance; together with the grand mean this fixes the gamma shape and
    scale (mean = shape * scale, variance = shape * scale**2).

    Raises
    ------
    DegenerateDataError
        When the bias mean or bias variance estimate is not positive.
    """
    groups = list(paired_diffs.values()) if isinstance(paired_diffs, Mapping) else list(paired_diffs)
    groups = [np.asarray(g, dtype=np.float64) for g in groups]
    if len(groups) < 2:
        raise ValueError("need at least 2 patients")
    if any(g.size < 2 for g in groups):
        raise ValueError("need at least 2 readings per patient")

    sizes = np.array([g.size for g in groups], dtype=np.float64)
    means = np.array([g.mean() for g in groups])
    within_ss = sum(((g - g.mean()) ** 2).sum() for g in groups)
    noise_var = within_ss / (sizes - 1.0).sum()

    bias_mean = float(means.mean())
    bias_var = float(np.var(means, ddof=1) - noise_var * np.mean(1.0 / sizes))
    if not bias_mean > 0:
        raise DegenerateDataError(f"bias mean estimate {bias_mean:.4g} is not positive")
    if not bias_var > 0:
        raise DegenerateDataError(f"bias variance estimate {bias_var:.4g} is not positive")
    if not noise_var > _NOISE_VAR_FLOOR:
        warnings.warn(
            f"noise variance estimate {noise_var:.3g} clamped to {_NOISE_VAR_FLOOR}",
            RuntimeWarning,
            stacklevel=2,
        )
        noise_var = _NOISE_VAR_FLOOR

    return CapillaryErrorSpec(
        bias_shape=bias_mean**2 / bias_var,
        bias_scale=bias_var / bias_mean,
        noise_var=float(noise_var),
    )
