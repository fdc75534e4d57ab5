import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from ogttbayes.dynamics import PatientParams
from ogttbayes.priors import PriorSpec, RejectionBudgetExceeded, gamma_logpdf, log_prior, sample_prior

SPEC = PriorSpec()


def scipy_log_prior(p, spec=SPEC):
    return (
        stats.gamma.logpdf(p.theta0, spec.theta0_shape, scale=spec.theta0_scale)
        + stats.gamma.logpdf(p.theta1, spec.theta1_shape, scale=spec.theta1_scale)
        + stats.gamma.logpdf(p.theta2, spec.theta2_shape, scale=spec.theta2_scale)
        + stats.norm.logpdf(p.g0, spec.g0_mean, math.sqrt(spec.g0_var))
    )


def test_theta0_component():
    # Gamma(2, 1) at 2: log(2 e^-2)
    assert gamma_logpdf(2.0, 2.0, 1.0) == pytest.approx(-1.30685, abs=1e-5)
    assert gamma_logpdf(2.0, 2.0, 1.0) == pytest.approx(math.log(2.0) - 2.0, abs=1e-14)


def test_shape_scale_convention():
    # mean 0.5, sd about 0.158 under shape-scale
    assert gamma_logpdf(0.5, 10.0, 0.05) == pytest.approx(stats.gamma.logpdf(0.5, 10.0, scale=0.05))
    assert gamma_logpdf(0.5, 10.0, 0.05) > gamma_logpdf(200.0, 10.0, 0.05)


@given(
    st.floats(1e-3, 20.0),
    st.floats(1e-3, 20.0),
    st.floats(0.161, 3.0),
    st.floats(30.0, 400.0),
)
def test_matches_scipy_on_support(th0, th1, th2, g0):
    p = PatientParams(th0, th1, th2, g0)
    assert log_prior(p) == pytest.approx(scipy_log_prior(p), rel=1e-10, abs=1e-10)


@pytest.mark.parametrize(
    "p",
    [
        PatientParams(1.0, 1.0, 0.15, 80.0),
        PatientParams(1.0, 1.0, 0.16, 80.0),
        PatientParams(1.0, 1.0, 0.5, 500.0),
        PatientParams(1.0, 1.0, 0.5, 29.9),
        PatientParams(0.0, 1.0, 0.5, 80.0),
        PatientParams(1.0, -1.0, 0.5, 80.0),
        PatientParams(1.0, 1.0, 0.5, math.nan),
        PatientParams(math.nan, 1.0, 0.5, 80.0),
    ],
)
def test_outside_support(p):
    assert log_prior(p) == -math.inf


@given(st.tuples(*[st.floats(-1e3, 1e3, allow_nan=False)] * 4))
def test_finite_exactly_on_support(x):
    p = PatientParams(*x)
    inside = p.theta0 > 0 and p.theta1 > 0 and p.theta2 > 0.16 and 30 <= p.g0 <= 400
    assert math.isfinite(log_prior(p)) == inside


def test_support_edges_inclusive_for_g0():
    assert math.isfinite(log_prior(PatientParams(1, 1, 0.5, 30.0)))
    assert math.isfinite(log_prior(PatientParams(1, 1, 0.5, 400.0)))


def test_untruncated_prior_is_total():
    spec = replace(SPEC, truncate=False)
    assert math.isfinite(log_prior(PatientParams(1.0, 1.0, 0.1, 500.0), spec))


def test_tail_decreases():
    vals = [log_prior(PatientParams(th0, 1.0, 0.5, 80.0)) for th0 in (5.0, 50.0, 500.0, 5e4)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert vals[-1] < -4e4


def test_integrates_to_finite_constant():
    # coarse product-grid quadrature over a box holding almost all the mass
    th = np.linspace(0.01, 15.0, 40)
    th2 = np.linspace(0.1601, 1.5, 30)
    g0 = np.linspace(30.0, 130.0, 30)
    d = [np.diff(a)[0] for a in (th, th, th2, g0)]
    total = 0.0
    for a in th:
        for b in th:
            w = math.exp(gamma_logpdf(a, 2, 1) + gamma_logpdf(b, 2, 1))
            if w < 1e-14:
                continue
            for c in th2:
                for g in g0:
                    total += math.exp(log_prior(PatientParams(a, b, c, g)))
    total *= np.prod(d)
    # mass of the truncation region in theta2 is stats.gamma.sf(0.16, 10, scale=0.05)
    expected = stats.gamma.sf(0.16, 10, scale=0.05)
    assert math.isfinite(total)
    assert total == pytest.approx(expected, rel=0.1)


class TestSamplePrior:
    def test_support(self):
        rng = np.random.default_rng(11)
        for _ in range(5000):
            p = sample_prior(SPEC, rng)
            assert p.theta2 > 0.16 and 30 <= p.g0 <= 400
            assert p.theta0 > 0 and p.theta1 > 0

    def test_untruncated_moments(self):
        spec = replace(SPEC, truncate=False)
        rng = np.random.default_rng(5)
        n = 100_000
        draws = np.array([sample_prior(spec, rng).as_array() for _ in range(n)])
        means = np.array([2.0, 2.0, 0.5, 80.0])
        sds = np.array([math.sqrt(2.0), math.sqrt(2.0), math.sqrt(10) * 0.05, 10.0])
        z = (draws.mean(axis=0) - means) / (sds / math.sqrt(n))
        assert np.all(np.abs(z) < 3.0)

    def test_deterministic(self):
        a = [sample_prior(SPEC, np.random.default_rng(42)) for _ in range(3)]
        b = [sample_prior(SPEC, np.random.default_rng(42)) for _ in range(3)]
        assert a == b

    def test_budget(self):
        spec = PriorSpec(theta2_shape=1.0, theta2_scale=1e-4)
        with pytest.raises(RejectionBudgetExceeded):
            sample_prior(spec, np.random.default_rng(0), max_tries=50)


def test_spec_validation():
    with pytest.raises(ValueError):
        PriorSpec(theta0_shape=0.0)
    with pytest.raises(ValueError):
        PriorSpec(g0_var=-1.0)
    with pytest.raises(ValueError):
        PriorSpec(g0_min=400.0, g0_max=30.0)
    assert PriorSpec.from_dict(SPEC.to_dict()) == SPEC
