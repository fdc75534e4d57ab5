"""Truncated prior over (theta0, theta1, theta2, G(0)) and prior sampling.

Gamma distributions use the shape-scale convention (mean = shape * scale);
the normal prior on G(0) is given by mean and *variance*.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .dynamics import PatientParams

__all__ = ["PriorSpec", "RejectionBudgetExceeded", "gamma_logpdf", "log_prior", "sample_prior"]


class RejectionBudgetExceeded(RuntimeError):
    pass


def gamma_logpdf(x: float, shape: float, scale: float) -> float:
    """Gamma log-density, shape-scale parameterization; -inf off the support."""
    if not x > 0:
        return -math.inf
    return (shape - 1.0) * math.log(x) - x / scale - math.lgamma(shape) - shape * math.log(scale)


def normal_logpdf(x: float, mean: float, var: float) -> float:
    return -0.5 * (math.log(2.0 * math.pi * var) + (x - mean) ** 2 / var)


@dataclass(frozen=True)
class PriorSpec:
    theta0_shape: float = 2.0
    theta0_scale: float = 1.0
    theta1_shape: float = 2.0
    theta1_scale: float = 1.0
    theta2_shape: float = 10.0
    theta2_scale: float = 1.0 / 20.0
    g0_mean: float = 80.0
    g0_var: float = 100.0
    theta2_min: float = 0.16
    g0_min: float = 30.0
    g0_max: float = 400.0
    truncate: bool = True

    def __post_init__(self):
        for name in (
            "theta0_shape", "theta0_scale", "theta1_shape", "theta1_scale",
            "theta2_shape", "theta2_scale", "g0_var",
        ):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.g0_min < self.g0_max:
            raise ValueError("g0_min must be below g0_max")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PriorSpec":
        return cls(**d)


def log_prior(p: PatientParams, spec: PriorSpec = PriorSpec()) -> float:
    """Unnormalized log prior density; ``-inf`` outside the support.

    Truncation normalizing constants are omitted.
    """
    th0, th1, th2, g0 = p.theta0, p.theta1, p.theta2, p.g0
    if not (th0 > 0 and th1 > 0 and th2 > 0 and math.isfinite(g0)):
        return -math.inf
    if spec.truncate and not (th2 > spec.theta2_min and spec.g0_min <= g0 <= spec.g0_max):
        return -math.inf
    return (
        gamma_logpdf(th0, spec.theta0_shape, spec.theta0_scale)
        + gamma_logpdf(th1, spec.theta1_shape, spec.theta1_scale)
        + gamma_logpdf(th2, spec.theta2_shape, spec.theta2_scale)
        + normal_logpdf(g0, spec.g0_mean, spec.g0_var)
    )


def sample_prior(
    spec: PriorSpec, rng: np.random.Generator, max_tries: int = 10_000
) -> PatientParams:
    """One draw from the (truncated) prior by rejection."""
    for _ in range(max_tries):
        p = PatientParams(
            rng.gamma(spec.theta0_shape, spec.theta0_scale),
            rng.gamma(spec.theta1_shape, spec.theta1_scale),
            rng.gamma(spec.theta2_shape, spec.theta2_scale),
            rng.normal(spec.g0_mean, math.sqrt(spec.g0_var)),
        )
        if math.isfinite(log_prior(p, spec)):
            return p
    raise RejectionBudgetExceeded(
        f"no draw inside the prior support after {max_tries} tries"
    )
