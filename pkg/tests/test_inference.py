"""Tests for the variance plug-in, the normal refinement and the bootstrap."""

import math

import numpy as np
import pytest
from scipy import integrate, stats

from specrisk import (
    BootstrapError,
    BootstrapPlan,
    EdgeworthDiagnostics,
    ExponentialSpectrum,
    LtrcSample,
    ProdEstimator,
    SingularDensityError,
    VariancePlugin,
    asymptotic_ci,
    bootstrap_ci,
    edgeworth_cdf,
    edgeworth_diagnostics,
    estimate_sigma2,
)

from conftest import random_ltrc_sample


class TestEdgeworthCdf:
    def test_tail_limits(self):
        diag = EdgeworthDiagnostics(
            sigma01_sq=2.0, kappa3=1.5, sigma0_sq=3.0, sigma1_sq=0.5, n=50, level=0.5
        )
        assert edgeworth_cdf(diag, -np.inf) == 0.0
        assert edgeworth_cdf(diag, np.inf) == 1.0

    def test_reduces_to_normal_without_correction(self):
        diag = EdgeworthDiagnostics(
            sigma01_sq=0.0, kappa3=0.0, sigma0_sq=0.0, sigma1_sq=0.0, n=50, level=0.5
        )
        for y in (-2.0, 0.0, 1.3):
            assert edgeworth_cdf(diag, y) == float(stats.norm.cdf(y))

    def test_hand_arithmetic_example(self):
        # Phi(1) - (1/sqrt(100)) phi(1) [0 * (1/6) + 1/2] = Phi(1) - 0.05 phi(1)
        diag = EdgeworthDiagnostics(
            sigma01_sq=1.0, kappa3=1.0, sigma0_sq=1.0, sigma1_sq=0.25, n=100, level=0.5
        )
        hand = 0.8292462098425857
        assert edgeworth_cdf(diag, 1.0) == pytest.approx(hand, abs=1e-9)

    def test_vectorized_evaluation(self):
        diag = EdgeworthDiagnostics(
            sigma01_sq=1.0, kappa3=-0.5, sigma0_sq=1.0, sigma1_sq=0.25, n=30, level=0.5
        )
        grid = np.array([-1.0, 0.0, 2.0])
        out = edgeworth_cdf(diag, grid)
        assert out.shape == grid.shape
        assert all(edgeworth_cdf(diag, float(y)) == pytest.approx(v) for y, v in zip(grid, out))

    def test_correction_scales_as_inverse_root_n(self):
        base = EdgeworthDiagnostics(
            sigma01_sq=1.2, kappa3=0.8, sigma0_sq=2.0, sigma1_sq=0.3, n=100, level=0.5
        )
        quad = EdgeworthDiagnostics(
            sigma01_sq=1.2, kappa3=0.8, sigma0_sq=2.0, sigma1_sq=0.3, n=400, level=0.5
        )
        y = np.linspace(-5, 5, 1001)
        dev_base = np.max(np.abs(edgeworth_cdf(base, y) - stats.norm.cdf(y)))
        dev_quad = np.max(np.abs(edgeworth_cdf(quad, y) - stats.norm.cdf(y)))
        assert dev_base / dev_quad == pytest.approx(2.0, abs=1e-9)


class TestEdgeworthDiagnostics:
    def test_complete_data_matches_literal_sum(self):
        values = np.array([3.0, 1.0, 4.0, 1.5, 9.0, 2.6, 5.3, 5.8, 9.7, 9.3])
        s = LtrcSample.from_complete_data(values)
        level = 0.6
        diag = edgeworth_diagnostics(s, level)
        # literal plug-in sums: C_n at the i-th order statistic is (n-i+1)/n
        ordered = np.sort(values)
        n = len(values)
        bound = ordered[math.ceil(level * n) - 1]
        s01 = sum(
            (n / (n - i)) ** 2 / n for i in range(n) if ordered[i] <= bound
        )
        i3 = sum((n / (n - i)) ** 3 / n for i in range(n) if ordered[i] <= bound)
        assert diag.sigma01_sq == pytest.approx(s01, rel=1e-12)
        expected_k3 = (-7.5 * s01**2 + i3) / s01**1.5
        assert diag.kappa3 == pytest.approx(expected_k3, rel=1e-12)
        assert diag.sigma1_sq == pytest.approx((1 - level) ** 2 * s01, rel=1e-12)

    def test_vanishing_level_empties_the_integral(self):
        s = LtrcSample.from_complete_data(np.arange(1.0, 21.0))
        diag = edgeworth_diagnostics(s, 0.04)
        # only the smallest point is below the fitted 4% quantile bound
        assert diag.sigma01_sq == pytest.approx((20 / 20) ** 2 / 20, rel=1e-12)

    def test_single_term_hand_computation(self):
        s = LtrcSample([1.0, 2.0], [0.0, 0.0], [1, 1])
        diag = edgeworth_diagnostics(s, 0.5)
        # one uncensored point below the bound, risk set 2: C = 1
        assert diag.sigma01_sq == pytest.approx(0.5, rel=1e-14)
        assert diag.kappa3 == pytest.approx((-7.5 * 0.25 + 0.5) / 0.5**1.5, rel=1e-12)

    def test_level_at_terminal_quantile_rejected(self):
        s = LtrcSample([1.0, 2.0], [0.0, 0.0], [1, 1])
        with pytest.raises(ValueError, match="largest observation"):
            edgeworth_diagnostics(s, 0.9)


class TestSigma2:
    def test_single_point_sample(self):
        s = LtrcSample([5.0, 5.0, 5.0], [0.0, 0.0, 0.0], [1, 1, 1])
        assert estimate_sigma2(s, ExponentialSpectrum(1.0)) == 0.0

    def test_scale_equivariance(self):
        rng = np.random.default_rng(2)
        s = LtrcSample.from_complete_data(1.0 + rng.exponential(1.0, 400))
        spec = ExponentialSpectrum(1.0)
        base = estimate_sigma2(s, spec)
        scaled = estimate_sigma2(
            LtrcSample.from_complete_data(3.0 * s.y), spec
        )
        assert scaled == pytest.approx(9.0 * base, rel=1e-9)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(3)
        s = random_ltrc_sample(rng, 120)
        spec = ExponentialSpectrum(1.0)
        perm = rng.permutation(len(s))
        shuffled = LtrcSample(s.y[perm], s.t[perm], s.delta[perm])
        assert estimate_sigma2(s, spec) == estimate_sigma2(shuffled, spec)

    def test_matches_lstatistic_oracle_on_clean_design(self):
        # moderately sized version of the acceptance check
        rng = np.random.default_rng(4)
        s = LtrcSample.from_complete_data(1000.0 + rng.exponential(1000.0, 2000))
        spec = ExponentialSpectrum(1.0)
        sigma2 = estimate_sigma2(s, spec)

        def integrand(v, u):
            return (
                (min(u, v) - u * v)
                / ((1 - u) * (1 - v))
                * spec.phi(u)
                * spec.phi(v)
            )

        oracle, _ = integrate.dblquad(integrand, 0, 1, 0, 1, epsabs=1e-9, epsrel=1e-7)
        oracle *= 1000.0**2  # 1/f(F^-1(u)) = theta / (1-u)
        assert sigma2 == pytest.approx(oracle, rel=0.2)

    def test_literal_product_form_differs(self):
        rng = np.random.default_rng(5)
        s = LtrcSample.from_complete_data(1.0 + rng.exponential(1.0, 300))
        spec = ExponentialSpectrum(1.0)
        min_form = estimate_sigma2(s, spec)
        literal = estimate_sigma2(
            s, spec, VariancePlugin(covariance_form="literal-product")
        )
        assert literal >= 0.0
        assert literal != pytest.approx(min_form, rel=0.05)

    def test_density_floor_triggers(self):
        rng = np.random.default_rng(6)
        s = LtrcSample.from_complete_data(rng.exponential(1.0, 50))
        with pytest.raises(SingularDensityError, match="below"):
            estimate_sigma2(s, ExponentialSpectrum(1.0), VariancePlugin(density_floor=1e6))


class TestBootstrap:
    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(7)
        s = random_ltrc_sample(rng, 60)
        plan = BootstrapPlan(replicates=80, seed=99)
        spec = ExponentialSpectrum(1.0)
        a = bootstrap_ci(s, ProdEstimator(), spec, plan)
        b = bootstrap_ci(s, ProdEstimator(), spec, plan)
        assert a == b

    def test_degenerate_sample_gives_zero_width(self):
        s = LtrcSample([4.0] * 20, [0.0] * 20, [1] * 20)
        rep = bootstrap_ci(s, ProdEstimator(), ExponentialSpectrum(5.0), BootstrapPlan(replicates=60, seed=1))
        assert rep.ci_low == rep.ci_high == pytest.approx(4.0, rel=1e-12)
        assert rep.point == pytest.approx(4.0, rel=1e-12)

    def test_single_replicate_contract(self):
        s = LtrcSample([1.0, 2.0], [0.0, 0.0], [1, 1])
        rep = bootstrap_ci(s, ProdEstimator(), ExponentialSpectrum(1.0), BootstrapPlan(replicates=1, seed=5))
        assert rep.std_error is None
        assert rep.ci_low is None and rep.ci_high is None
        assert rep.replicates_used == 1

    def test_below_interval_threshold_gives_point_and_se_only(self):
        s = LtrcSample([1.0, 2.0, 3.0], [0.0] * 3, [1] * 3)
        rep = bootstrap_ci(s, ProdEstimator(), ExponentialSpectrum(1.0), BootstrapPlan(replicates=20, seed=5))
        assert rep.std_error is not None
        assert rep.ci_low is None

    def test_shift_invariance_of_interval(self):
        rng = np.random.default_rng(8)
        s = random_ltrc_sample(rng, 50)
        spec = ExponentialSpectrum(1.0)
        plan = BootstrapPlan(replicates=100, seed=3)
        base = bootstrap_ci(s, ProdEstimator(), spec, plan)
        shifted_sample = LtrcSample(s.y + 10.0, s.t + 10.0, s.delta)
        shifted = bootstrap_ci(shifted_sample, ProdEstimator(), spec, plan)
        scale = abs(base.ci_high) + 10.0
        assert shifted.ci_low == pytest.approx(base.ci_low + 10.0, abs=1e-9 * scale)
        assert shifted.ci_high == pytest.approx(base.ci_high + 10.0, abs=1e-9 * scale)

    def test_endpoints_are_order_statistics(self):
        rng = np.random.default_rng(9)
        s = random_ltrc_sample(rng, 40)
        rep = bootstrap_ci(
            s, ProdEstimator(), ExponentialSpectrum(1.0), BootstrapPlan(replicates=101, seed=11)
        )
        assert rep.ci_low <= rep.point <= rep.ci_high

    def test_many_spectra_match_single_spectrum_runs(self):
        from specrisk import bootstrap_ci_many

        rng = np.random.default_rng(12)
        s = random_ltrc_sample(rng, 45)
        plan = BootstrapPlan(replicates=80, seed=21)
        spectra = [ExponentialSpectrum(k) for k in (1.0, 10.0, 100.0)]
        shared = bootstrap_ci_many(s, ProdEstimator(), spectra, plan)
        for spec, report in zip(spectra, shared):
            assert report == bootstrap_ci(s, ProdEstimator(), spec, plan)

    def test_order_statistic_helper_brackets_the_median(self):
        from specrisk.inference import _order_statistic

        rng = np.random.default_rng(10)
        reps = np.sort(rng.normal(size=73))
        lo, mid, hi = (_order_statistic(reps, q) for q in (0.05, 0.5, 0.95))
        assert lo <= mid <= hi
        assert lo in reps and hi in reps

    def test_failure_budget_enforced(self):
        from specrisk import EstimationError

        class SometimesFailing:
            # fails whenever the resample starts above 1.5, which happens in
            # roughly three quarters of the resamples of this sample
            name = "sometimes"

            def __call__(self, sample, spectrum):
                if float(sample.y[0]) > 1.5:
                    raise EstimationError("synthetic failure")
                return float(sample.y.mean())

        s = LtrcSample([1.0, 2.0, 2.0, 2.0], [0.0] * 4, [1] * 4)
        with pytest.raises(BootstrapError, match="interval refused"):
            bootstrap_ci(s, SometimesFailing(), ExponentialSpectrum(1.0), BootstrapPlan(replicates=100, seed=2))


class TestAsymptoticCi:
    def test_zero_level_gives_zero_width(self):
        rng = np.random.default_rng(10)
        s = LtrcSample.from_complete_data(1.0 + rng.exponential(1.0, 100))
        rep = asymptotic_ci(s, ExponentialSpectrum(1.0), level=0.0)
        assert rep.ci_low == rep.ci_high == rep.point

    def test_degenerate_variance_collapses_interval(self):
        s = LtrcSample([2.0] * 10, [0.0] * 10, [1] * 10)
        rep = asymptotic_ci(s, ExponentialSpectrum(1.0), level=0.9)
        assert rep.ci_low == rep.ci_high == rep.point

    def test_ninety_percent_uses_standard_normal_quantile(self):
        rng = np.random.default_rng(11)
        s = LtrcSample.from_complete_data(1.0 + rng.exponential(1.0, 200))
        rep = asymptotic_ci(s, ExponentialSpectrum(1.0), level=0.90)
        z = 1.6448536269514722  # 95th standard normal percentile
        assert rep.ci_high - rep.point == pytest.approx(z * rep.std_error, rel=1e-9)
        assert rep.point - rep.ci_low == pytest.approx(z * rep.std_error, rel=1e-9)
