import math

import numpy as np
import pytest

from ogttbayes.twalk import Chain, TWalkSettings, burn_and_thin, integrated_autocorrelation, twalk_run


def std_normal(x):
    return -0.5 * float(x @ x)


def unit_box(x):
    return 0.0 if np.all((x > 0) & (x < 1)) else -math.inf


class TestRun:
    def test_standard_normal_moments(self):
        chain = twalk_run(std_normal, np.ones(4), -0.5 * np.ones(4), 100_000, 1)
        draws = chain.draws
        for j in range(4):
            tau = integrated_autocorrelation(chain, j)
            se = math.sqrt(tau / len(chain))
            assert abs(draws[:, j].mean()) < 4 * se
            assert draws[:, j].var() == pytest.approx(1.0, rel=0.10)

    def test_box_support(self):
        chain = twalk_run(unit_box, [0.2, 0.3, 0.4], [0.6, 0.7, 0.8], 20_000, 3)
        assert np.all((chain.draws > 0) & (chain.draws < 1))
        assert np.all(np.isfinite(chain.logdens))
        # it does move across the box
        assert chain.draws.min() < 0.05 and chain.draws.max() > 0.95

    def test_deterministic(self):
        a = twalk_run(std_normal, [1.0, 2.0], [-1.0, 0.5], 2000, 99)
        b = twalk_run(std_normal, [1.0, 2.0], [-1.0, 0.5], 2000, np.random.default_rng(99))
        assert np.array_equal(a.draws, b.draws)
        assert np.array_equal(a.accepted, b.accepted)
        assert a.seed == 99 and b.seed is None

    def test_counters(self):
        chain = twalk_run(std_normal, [1.0, 2.0, 3.0], [-1.0, 0.5, 0.1], 5000, 4)
        assert chain.proposed.sum() == 5000
        assert np.all(chain.accepted <= chain.proposed)
        rates = chain.acceptance_rates
        assert 0 < rates["overall"] < 1
        # traverse and walk dominate the proposal mix
        assert chain.proposed[:2].sum() > 0.95 * 5000

    def test_logdens_matches_draws(self):
        chain = twalk_run(std_normal, [1.0, 2.0], [-1.0, 0.5], 1000, 5)
        expect = np.array([std_normal(x) for x in chain.draws])
        np.testing.assert_allclose(chain.logdens, expect)

    def test_nan_target_is_rejection(self):
        def target(x):
            return float("nan") if x[0] > 1.0 else std_normal(x)

        chain = twalk_run(target, [0.1, 0.2], [-0.5, 0.5], 5000, 6)
        assert np.all(chain.draws[:, 0] <= 1.0)

    @pytest.mark.parametrize(
        "x0,x0p,it",
        [
            ([1.0, 2.0], [1.0, 0.5], 10),  # shared coordinate
            ([1.0, 2.0], [0.0, 0.5], 0),
            ([2.0, 0.5], [0.3, 0.4], 10),  # outside the box
            ([1.0, 2.0], [0.0, 0.5, 1.0], 10),
        ],
    )
    def test_invalid_start(self, x0, x0p, it):
        target = unit_box if x0 == [2.0, 0.5] else std_normal
        with pytest.raises(ValueError):
            twalk_run(target, x0, x0p, it, 0)

    def test_settings_validation(self):
        with pytest.raises(ValueError):
            TWalkSettings(kernel_probs=(0.5, 0.5, 0.1, 0.0))
        with pytest.raises(ValueError):
            TWalkSettings(traverse_param=1.0)


@pytest.mark.slow
def test_bimodal_symmetry():
    # equal-weight mixture of N(-3, 1) and N(3, 1), 2-D so every move type is used
    def target(x):
        a = -0.5 * ((x[0] + 3) ** 2 + x[1] ** 2)
        b = -0.5 * ((x[0] - 3) ** 2 + x[1] ** 2)
        return float(np.logaddexp(a, b))

    chain = twalk_run(target, [-3.0, 0.1], [3.0, -0.1], 400_000, 8)
    right = chain.draws[:, 0] > 0
    tau = integrated_autocorrelation(right.astype(float))
    se = math.sqrt(0.25 * tau / len(chain))
    assert abs(right.mean() - 0.5) < 4 * se


@pytest.mark.slow
def test_ill_conditioned_gaussian():
    # condition number 1e4, rotated off the axes
    angle = 0.6
    rot = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
    cov = rot @ np.diag([100.0, 0.01]) @ rot.T
    prec = np.linalg.inv(cov)

    def target(x):
        return -0.5 * float(x @ prec @ x)

    chain = twalk_run(target, [1.0, 0.5], [-0.4, -0.2], 1_000_000, 9)
    var = chain.draws[200_000:].var(axis=0)
    np.testing.assert_allclose(var, np.diag(cov), rtol=0.20)


class TestIAT:
    def test_white_noise(self):
        x = np.random.default_rng(0).standard_normal(20_000)
        assert integrated_autocorrelation(x) == pytest.approx(1.0, rel=0.2)

    def test_ar1(self):
        rng = np.random.default_rng(1)
        rho, n = 0.5, 50_000
        x = np.empty(n)
        x[0] = rng.standard_normal()
        for t in range(1, n):
            x[t] = rho * x[t - 1] + math.sqrt(1 - rho**2) * rng.standard_normal()
        assert integrated_autocorrelation(x) == pytest.approx((1 + rho) / (1 - rho), rel=0.25)

    def test_constant_chain_reports_length(self):
        assert integrated_autocorrelation(np.full(500, 3.0)) == 500.0

    def test_too_short(self):
        with pytest.raises(ValueError):
            integrated_autocorrelation(np.zeros(99))

    def test_coordinate_of_chain(self):
        rng = np.random.default_rng(2)
        draws = np.column_stack([rng.standard_normal(1000), np.full(1000, 1.0)])
        chain = Chain(draws, np.zeros(1000))
        assert integrated_autocorrelation(chain, 1) == 1000.0
        assert integrated_autocorrelation(chain, 0) < 2.0


class TestBurnThin:
    def chain(self, n=100):
        draws = np.arange(n, dtype=float).reshape(-1, 1)
        return Chain(draws, -draws[:, 0])

    def test_identity(self):
        c = self.chain()
        out = burn_and_thin(c, 0, 1)
        assert np.array_equal(out.draws, c.draws)

    def test_arithmetic(self):
        out = burn_and_thin(self.chain(), 50, 5)
        assert len(out) == 10
        assert out.draws[:, 0].tolist() == list(range(50, 100, 5))
        assert np.array_equal(out.logdens, -out.draws[:, 0])

    def test_order_preserved(self):
        out = burn_and_thin(self.chain(), 7, 3)
        assert np.all(np.diff(out.draws[:, 0]) > 0)

    @pytest.mark.parametrize("burn,stride", [(99, 2), (-1, 1), (0, 0), (100, 1)])
    def test_errors(self, burn, stride):
        with pytest.raises(ValueError):
            burn_and_thin(self.chain(), burn, stride)
