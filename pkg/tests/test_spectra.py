"""Tests for the risk-aversion spectra: admissibility and closed-form integrals."""

import math

import numpy as np
import pytest
from scipy import integrate

from specrisk import ExpectedShortfallSpectrum, ExponentialSpectrum

K_GRID = (1.0, 5.0, 10.0, 20.0, 100.0, 200.0)


class TestExponentialSpectrum:
    def test_normalization_is_exact(self):
        for k in K_GRID:
            assert ExponentialSpectrum(k).segment_integral(0.0, 1.0) == pytest.approx(
                1.0, abs=1e-15
            )

    def test_half_segment_closed_form(self):
        # (1 - e^{-1/2}) / (1 - e^{-1}), evaluated independently
        expected = (1.0 - math.exp(-0.5)) / (1.0 - math.exp(-1.0))
        assert ExponentialSpectrum(1.0).segment_integral(0.5, 1.0) == pytest.approx(
            expected, rel=1e-15
        )

    def test_empty_segment(self):
        assert ExponentialSpectrum(3.0).segment_integral(0.4, 0.4) == 0.0

    def test_additivity_over_partitions(self):
        rng = np.random.default_rng(3)
        for k in K_GRID:
            spec = ExponentialSpectrum(k)
            for _ in range(5):
                cuts = np.sort(rng.uniform(0, 1, size=30))
                grid = np.concatenate(([0.0], cuts, [1.0]))
                total = float(np.sum(spec.segment_integral(grid[:-1], grid[1:])))
                assert abs(total - 1.0) <= 1e-12

    def test_admissible_weight_function(self):
        u = np.linspace(0.0, 1.0, 201)
        for k in K_GRID:
            spec = ExponentialSpectrum(k)
            phi = spec.phi(u)
            assert np.all(phi >= 0)
            assert np.all(np.diff(phi) >= 0)
            total, _ = integrate.quad(spec.phi, 0.0, 1.0)
            assert total == pytest.approx(1.0, rel=1e-9)

    def test_uniform_limit(self):
        spec = ExponentialSpectrum(0.0)
        assert spec.phi(0.3) == 1.0
        assert spec.segment_integral(0.2, 0.7) == pytest.approx(0.5, abs=1e-15)

    def test_negative_k_rejected(self):
        with pytest.raises(ValueError, match=">= 0"):
            ExponentialSpectrum(-1.0)

    @pytest.mark.parametrize("k", [0.0, 1.0, 20.0, 200.0])
    def test_decay_integrals_match_quadrature(self, k):
        spec = ExponentialSpectrum(k)
        for a, b in ((0.0, 1.0), (0.1, 0.35), (0.8, 0.999)):
            one, _ = integrate.quad(lambda u: (1 - u) * spec.phi(u), a, b, epsrel=1e-12)
            two, _ = integrate.quad(lambda u: (1 - u) ** 2 * spec.phi(u), a, b, epsrel=1e-12)
            assert spec.decay_integral(a, b) == pytest.approx(one, rel=1e-9, abs=1e-14)
            assert spec.decay_sq_integral(a, b) == pytest.approx(two, rel=1e-9, abs=1e-14)


class TestExpectedShortfallSpectrum:
    def test_segment_integral(self):
        spec = ExpectedShortfallSpectrum(0.9)
        assert spec.segment_integral(0.0, 0.9) == 0.0
        assert spec.segment_integral(0.9, 1.0) == pytest.approx(1.0, abs=1e-15)
        assert spec.segment_integral(0.95, 1.0) == pytest.approx(0.5, rel=1e-12)

    def test_straddling_segment(self):
        spec = ExpectedShortfallSpectrum(0.9)
        assert spec.segment_integral(0.85, 0.95) == pytest.approx(0.5, rel=1e-12)

    def test_decay_integral_matches_quadrature(self):
        spec = ExpectedShortfallSpectrum(0.8)
        val, _ = integrate.quad(lambda u: (1 - u) * spec.phi(u), 0.0, 1.0, points=[0.8])
        assert spec.decay_integral(0.0, 1.0) == pytest.approx(val, rel=1e-9)

    def test_invalid_level(self):
        with pytest.raises(ValueError, match="tail level"):
            ExpectedShortfallSpectrum(1.0)

    def test_segment_bounds_checked(self):
        with pytest.raises(ValueError, match="segment bounds"):
            ExpectedShortfallSpectrum(0.5).segment_integral(0.7, 0.2)
