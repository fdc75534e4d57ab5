"""Synthetic patients drawn from the prior and the two error models."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .config import RunConfig
from .dynamics import PatientParams, StepSizeUnderflow, solve_glucose
from .io import write_patient
from .observations import VALUE_RANGE, ObservationSet
from .priors import sample_prior

__all__ = ["SyntheticPatient", "STANDARD_TIMES_MIN", "simulate_patient", "generate_synthetic_cohort"]

STANDARD_TIMES_MIN = (0.0, 30.0, 60.0, 90.0, 120.0)


@dataclass(frozen=True)
class SyntheticPatient:
    obs: ObservationSet
    params: PatientParams
    bias: float
    noiseless: np.ndarray  # G(t_i) at the sampling times


def simulate_patient(
    patient_id: str,
    config: RunConfig,
    rng: np.random.Generator,
    times_min: Sequence[float] = STANDARD_TIMES_MIN,
    params: Optional[PatientParams] = None,
    max_tries: int = 1000,
) -> SyntheticPatient:
    """Venous readings with scaled-t noise and capillary readings with a
    per-test gamma bias plus Gaussian noise, at the same times.

    Draws whose readings leave the valid glucose range are redrawn.
    """
    times_h = np.asarray(times_min, dtype=np.float64) / 60.0
    lo, hi = VALUE_RANGE
    ven, cap = config.venous, config.capillary
    for _ in range(max_tries):
        p = params if params is not None else sample_prior(config.prior, rng)
        try:
            g = solve_glucose(p, config.constants, times_h, config.sampler.tol)
        except StepSizeUnderflow:
            if params is not None:
                raise
            continue
        venous = g + ven.sigma * rng.standard_t(ven.dof, size=g.size)
        bias = float(rng.gamma(cap.bias_shape, cap.bias_scale))
        capillary = g + bias + rng.normal(0.0, np.sqrt(cap.noise_var), size=g.size)
        if np.all((venous > lo) & (venous < hi) & (capillary > lo) & (capillary < hi)):
            obs = ObservationSet.from_series(
                patient_id, venous=(times_h, venous), capillary=(times_h, capillary)
            )
            return SyntheticPatient(obs, p, bias, g)
    raise RuntimeError(f"could not simulate a valid patient in {max_tries} tries")


def generate_synthetic_cohort(
    n: int,
    config: RunConfig,
    rng: np.random.Generator,
    out_dir,
    times_min: Sequence[float] = STANDARD_TIMES_MIN,
) -> list[SyntheticPatient]:
    """Write ``n`` synthetic patient files plus ``truth.json`` into ``out_dir``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    patients, truth = [], {}
    width = max(3, len(str(n - 1)))
    for i in range(n):
        pid = f"patient{i:0{width}d}"
        sp = simulate_patient(pid, config, rng, times_min)
        write_patient(sp.obs, out / f"{pid}.csv")
        patients.append(sp)
        truth[pid] = {
            "theta0": sp.params.theta0,
            "theta1": sp.params.theta1,
            "theta2": sp.params.theta2,
            "g0": sp.params.g0,
            "bias": sp.bias,
        }
    (out / "truth.json").write_text(json.dumps(truth, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return patients
