"""Posterior inference for OGTT series and venous/capillary concordance."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config import DEFAULT_QUANTILES, ConcordanceThresholds, RunConfig
from .dynamics import (
    ModelConstants,
    PatientParams,
    StepSizeUnderflow,
    glucose_at,
    integrate,
    solve_glucose,
)
from .error_models import (
    CapillaryErrorSpec,
    VenousErrorSpec,
    bias_log_prior,
    capillary_loglik,
    venous_loglik,
)
from .observations import CAPILLARY, VENOUS, ObservationSet
from .priors import PriorSpec, log_prior, sample_prior
from .twalk import burn_and_thin, integrated_autocorrelation, twalk_run

__all__ = [
    "PosteriorEnsemble",
    "Band",
    "ConcordanceReport",
    "InferenceError",
    "log_posterior_venous",
    "log_posterior_capillary",
    "run_ogtt_inference",
    "predictive_band",
    "concordance",
    "classify",
    "CONCORDANT",
    "INCONCLUSIVE",
    "DISCORDANT",
]

CONCORDANT, INCONCLUSIVE, DISCORDANT = "concordant", "inconclusive", "discordant"


class InferenceError(RuntimeError):
    pass


def _model_glucose(p, k, times, tol) -> Optional[np.ndarray]:
    try:
        return solve_glucose(p, k, times, tol)
    except StepSizeUnderflow:
        return None


def log_posterior_venous(
    p: PatientParams,
    obs: ObservationSet,
    k: ModelConstants = ModelConstants(),
    prior: PriorSpec = PriorSpec(),
    venous: VenousErrorSpec = VenousErrorSpec(),
    tol: float = 1e-6,
) -> float:
    """Log posterior (up to a constant) of the parameters given venous readings.

    The ODE is not solved when the prior already excludes ``p``; a failed
    solve counts as zero likelihood.
    """
    times, values = obs.series(VENOUS)
    if times.size == 0:
        raise ValueError("no venous readings")
    return _venous_target(times, values, k, prior, venous, tol)(p.as_array())


def log_posterior_capillary(
    p: PatientParams,
    bias: float,
    obs: ObservationSet,
    k: ModelConstants = ModelConstants(),
    prior: PriorSpec = PriorSpec(),
    capillary: CapillaryErrorSpec = CapillaryErrorSpec(),
    tol: float = 1e-6,
) -> float:
    times, values = obs.series(CAPILLARY)
    if times.size == 0:
        raise ValueError("no capillary readings")
    x = np.append(p.as_array(), bias)
    return _capillary_target(times, values, k, prior, capillary, tol)(x)


def _venous_target(times, values, k, prior, venous, tol):
    def target(x):
        p = PatientParams(x[0], x[1], x[2], x[3])
        lp = log_prior(p, prior)
        if lp == -math.inf:
            return lp
        g = _model_glucose(p, k, times, tol)
        if g is None:
            return -math.inf
        return lp + venous_loglik(g, values, venous)

    return target


def _capillary_target(times, values, k, prior, capillary, tol):
    def target(x):
        p = PatientParams(x[0], x[1], x[2], x[3])
        lp = log_prior(p, prior) + bias_log_prior(x[4], capillary)
        if lp == -math.inf:
            return lp
        g = _model_glucose(p, k, times, tol)
        if g is None:
            return -math.inf
        return lp + capillary_loglik(g, values, x[4], capillary)

    return target


@dataclass(frozen=True)
class PosteriorEnsemble:
    """Thinned posterior draws and their glucose curves on a fixed grid.

    ``params`` has columns theta0, theta1, theta2, G(0); ``bias`` is set for
    capillary runs only. ``glucose[j]`` is G(t) of draw j on ``grid``.
    """

    source: str
    params: np.ndarray
    bias: Optional[np.ndarray]
    grid: np.ndarray
    glucose: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.params.shape[0]


def _initial_points(values, source, config: RunConfig, rng, target, max_tries=1000):
    prior = config.prior
    jitter = config.sampler.g0_jitter
    lo, hi = prior.g0_min, prior.g0_max
    points = []
    for _ in range(max_tries):
        p = sample_prior(prior, rng)
        g0 = float(np.clip(values[0] + jitter * rng.standard_normal(), lo, hi))
        x = [p.theta0, p.theta1, p.theta2, g0]
        if source == CAPILLARY:
            x.append(rng.gamma(config.capillary.bias_shape, config.capillary.bias_scale))
        x = np.array(x)
        if points and np.any(x == points[0]):
            continue
        if math.isfinite(target(x)):
            points.append(x)
            if len(points) == 2:
                return points
    raise InferenceError("could not find two valid starting points for the sampler")


def _trajectories(params, k, grid, tol):
    curves = np.empty((params.shape[0], grid.size))
    ok = np.ones(params.shape[0], dtype=bool)
    for j, row in enumerate(params):
        try:
            curves[j] = glucose_at(integrate(PatientParams.from_array(row), k, grid[-1], tol), grid)
        except StepSizeUnderflow:
            ok[j] = False
    return curves, ok


def run_ogtt_inference(obs: ObservationSet, source: str, config: RunConfig = RunConfig()) -> PosteriorEnsemble:
    """Sample the posterior for one source of one patient.

    The chain is burned by ``burn_fraction`` and thinned by the ceiling of the
    largest per-coordinate integrated autocorrelation time.
    """
    if source not in (VENOUS, CAPILLARY):
        raise ValueError(f"unknown source {source!r}")
    times, values = obs.series(source)
    if times.size == 0:
        raise InferenceError(f"patient {obs.patient_id} has no {source} readings")
    k, sc = config.constants, config.sampler
    if source == VENOUS:
        target = _venous_target(times, values, k, config.prior, config.venous, sc.tol)
    else:
        target = _capillary_target(times, values, k, config.prior, config.capillary, sc.tol)

    rng = np.random.default_rng(sc.seed)
    x0, x0p = _initial_points(values, source, config, rng, target)
    chain = twalk_run(target, x0, x0p, sc.iterations, rng, sc.twalk)
    if chain.accepted.sum() == 0:
        raise InferenceError("sampler accepted no proposals")

    burn = int(sc.burn_fraction * sc.iterations)
    post = chain.draws[burn:]
    if post.shape[0] >= 100:
        iats = [integrated_autocorrelation(post, j) for j in range(post.shape[1])]
    else:
        iats = [1.0] * post.shape[1]
    stride = max(1, int(math.ceil(max(iats))))
    stride = min(stride, max(1, len(chain) - burn))
    kept = burn_and_thin(chain, burn, stride)

    grid = config.grid.times()
    curves, ok = _trajectories(kept.draws[:, :4], k, grid, sc.tol)
    draws = kept.draws[ok]
    metadata = {
        "patient_id": obs.patient_id,
        "source": source,
        "seed": int(sc.seed),
        "iterations": int(sc.iterations),
        "burn": burn,
        "stride": stride,
        "iat": [float(v) for v in iats],
        "n_kept": int(draws.shape[0]),
        "n_failed_solves": int((~ok).sum()),
        "acceptance": chain.acceptance_rates,
        "n_readings": int(times.size),
        "few_readings": bool(times.size < 3),
    }
    return PosteriorEnsemble(
        source=source,
        params=draws[:, :4].copy(),
        bias=draws[:, 4].copy() if source == CAPILLARY else None,
        grid=grid,
        glucose=curves[ok],
        metadata=metadata,
    )


@dataclass(frozen=True)
class Band:
    """Per-node quantiles of G(t); ``quantiles[i]`` is the curve at ``probs[i]``."""

    grid: np.ndarray
    probs: tuple
    quantiles: np.ndarray
    mean: np.ndarray

    def curve(self, prob: float) -> np.ndarray:
        for i, q in enumerate(self.probs):
            if math.isclose(q, prob, abs_tol=1e-12):
                return self.quantiles[i]
        raise KeyError(f"band has no {prob} quantile (has {self.probs})")

    def interval(self, level: float = 0.95) -> tuple[np.ndarray, np.ndarray]:
        """Central credible interval at every node."""
        return self.curve(0.5 - level / 2), self.curve(0.5 + level / 2)


def predictive_band(ens: PosteriorEnsemble, quantiles=DEFAULT_QUANTILES) -> Band:
    if len(ens) == 0:
        raise ValueError("empty ensemble")
    probs = tuple(sorted(float(q) for q in quantiles))
    q = np.quantile(ens.glucose, probs, axis=0)
    # guard against floating-point non-monotonicity between adjacent quantiles
    q = np.maximum.accumulate(q, axis=0)
    return Band(ens.grid.copy(), probs, q, ens.glucose.mean(axis=0))


@dataclass(frozen=True)
class ConcordanceReport:
    overlap: np.ndarray
    mean_overlap: float
    width_ratio: float
    classification: str
    thresholds: ConcordanceThresholds

    def to_dict(self) -> dict:
        return {
            "classification": self.classification,
            "mean_overlap": self.mean_overlap,
            "width_ratio": self.width_ratio,
            "overlap": [float(v) for v in self.overlap],
            "thresholds": {
                "min_overlap": self.thresholds.min_overlap,
                "max_width_ratio": self.thresholds.max_width_ratio,
            },
        }


def classify(mean_overlap: float, width_ratio: float, thresholds=ConcordanceThresholds()) -> str:
    if mean_overlap < thresholds.min_overlap:
        return DISCORDANT
    if width_ratio > thresholds.max_width_ratio:
        return INCONCLUSIVE
    return CONCORDANT


def interval_overlap(lo1, hi1, lo2, hi2) -> np.ndarray:
    """Length of intersection over length of union, per node."""
    lo1, hi1, lo2, hi2 = (np.asarray(a, dtype=np.float64) for a in (lo1, hi1, lo2, hi2))
    inter = np.clip(np.minimum(hi1, hi2) - np.maximum(lo1, lo2), 0.0, None)
    union = (hi1 - lo1) + (hi2 - lo2) - inter
    same_point = (lo1 == lo2) & (hi1 == hi2)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(union > 0, inter / np.where(union > 0, union, 1.0), 0.0)
    return np.where((union <= 0) & same_point, 1.0, out)


def concordance(
    venous: Band, capillary: Band, thresholds: ConcordanceThresholds = ConcordanceThresholds()
) -> ConcordanceReport:
    """Compare the central 95% bands from venous and capillary inference.

    Discordant when the mean overlap index falls below ``min_overlap``;
    otherwise inconclusive when the capillary band is on average more than
    ``max_width_ratio`` times wider; otherwise concordant.
    """
    if venous.grid.shape != capillary.grid.shape or not np.array_equal(venous.grid, capillary.grid):
        raise ValueError("bands are on different time grids")
    vlo, vhi = venous.interval(0.95)
    clo, chi = capillary.interval(0.95)
    overlap = interval_overlap(vlo, vhi, clo, chi)
    mean_overlap = float(overlap.mean())
    vw = float(np.mean(vhi - vlo))
    cw = float(np.mean(chi - clo))
    if vw > 0:
        ratio = cw / vw
    else:
        ratio = 1.0 if cw == 0 else math.inf
    return ConcordanceReport(
        overlap=overlap,
        mean_overlap=mean_overlap,
        width_ratio=ratio,
        classification=classify(mean_overlap, ratio, thresholds),
        thresholds=thresholds,
    )
