"""Bayesian inference of OGTT glucose curves from venous and capillary readings."""

from .config import RunConfig
from .dynamics import ModelConstants, PatientParams, State, Trajectory, glucose_at, initial_state, integrate, rhs
from .error_models import CapillaryErrorSpec, VenousErrorSpec
from .inference import (
    Band,
    ConcordanceReport,
    PosteriorEnsemble,
    concordance,
    log_posterior_capillary,
    log_posterior_venous,
    predictive_band,
    run_ogtt_inference,
)
from .observations import ObservationSet
from .priors import PriorSpec, log_prior, sample_prior
from .twalk import Chain, burn_and_thin, integrated_autocorrelation, twalk_run

__version__ = "0.1.0"

__all__ = [
    "RunConfig",
    "ModelConstants",
    "PatientParams",
    "State",
    "Trajectory",
    "glucose_at",
    "initial_state",
    "integrate",
    "rhs",
    "CapillaryErrorSpec",
    "VenousErrorSpec",
    "Band",
    "ConcordanceReport",
    "PosteriorEnsemble",
    "concordance",
    "log_posterior_capillary",
    "log_posterior_venous",
    "predictive_band",
    "run_ogtt_inference",
    "ObservationSet",
    "PriorSpec",
    "log_prior",
    "sample_prior",
    "Chain",
    "burn_and_thin",
    "integrated_autocorrelation",
    "twalk_run",
]
