import numpy as np
import pytest

from eecop import (FitError, GaussianMargin, fit_gaussian_margin,
                   fit_kernel_margin, margin_quantile)
from eecop.margins import normal_reference_bandwidth

SQRT_2PI = np.sqrt(2 * np.pi)


# Independent Phi oracle: the classical series
# Phi(x) = 1/2 + phi(x) * sum_k x^(2k+1) / (1 * 3 * ... * (2k+1)).
def phi_series(x: float) -> float:
    term = x
    total = x
    for k in range(1, 120):
        term *= x * x / (2 * k + 1)
        total += term
        if abs(term) < 1e-18:
            break
    return 0.5 + np.exp(-0.5 * x * x) / SQRT_2PI * total


def phi_inv_newton(t: float) -> float:
    # Newton on the series oracle; the density is its exact derivative.
    x = 0.0
    for _ in range(60):
        f = phi_series(x) - t
        x -= f / (np.exp(-0.5 * x * x) / SQRT_2PI)
        if abs(f) < 1e-15:
            break
    return x


class TestGaussianFit:
    def test_two_symmetric_points(self):
        m = fit_gaussian_margin(np.array([-1.0, 1.0]))
        assert m.mu == pytest.approx(0.0, abs=1e-15)
        assert m.sigma == pytest.approx(1.0, abs=1e-15)  # MLE: 1/n variance

    def test_degenerate_error(self):
        with pytest.raises(FitError) as err:
            fit_gaussian_margin(np.array([5.0, 5.0, 5.0]))
        assert err.value.code == "margins.degenerate"

    def test_large_sample_recovery(self):
        z = np.random.default_rng(42).standard_normal(1000)
        m = fit_gaussian_margin(z)
        assert abs(m.mu) < 0.1
        assert abs(m.sigma - 1.0) < 0.1

    def test_shift_equivariance(self):
        rng = np.random.default_rng(0)
        z = rng.standard_normal(100)
        m1 = fit_gaussian_margin(z)
        m2 = fit_gaussian_margin(z + 3.5)
        assert m2.mu == pytest.approx(m1.mu + 3.5, abs=1e-12)
        assert m2.sigma == pytest.approx(m1.sigma, abs=1e-12)

    def test_unit_multipliers_identical(self):
        rng = np.random.default_rng(1)
        z = rng.standard_normal(60)
        a = fit_gaussian_margin(z)
        b = fit_gaussian_margin(z, m=np.ones(60))
        assert (a.mu, a.sigma) == (b.mu, b.sigma)

    def test_weighted_fit_moves_mean(self):
        z = np.array([0.0, 10.0])
        m = fit_gaussian_margin(z, m=np.array([3.0, 1.0]))
        assert m.mu == pytest.approx(2.5)


class TestKernelFit:
    def test_single_point_rejected(self):
        with pytest.raises(FitError):
            fit_kernel_margin(np.array([0.0]))

    def test_symmetry_midpoint(self):
        km = fit_kernel_margin(np.array([-1.0, 1.0]), 1.0)
        assert km.cdf(0.0) == pytest.approx(0.5, abs=1e-15)

    def test_cdf_against_series_oracle(self):
        km = fit_kernel_margin(np.array([0.0, 2.0]), 0.5)
        assert km.cdf(1.0) == pytest.approx(0.5, abs=1e-12)
        expected = 0.5 * (phi_series(0.0) + phi_series(-4.0))
        assert expected == pytest.approx(0.2500158, abs=1e-6)
        assert km.cdf(0.0) == pytest.approx(expected, abs=1e-10)

    def test_bad_fixed_bandwidth(self):
        with pytest.raises(FitError):
            fit_kernel_margin(np.array([0.0, 1.0]), 0.0)
        with pytest.raises(FitError):
            fit_kernel_margin(np.array([0.0, 1.0]), -1.0)

    def test_normal_reference_rule(self):
        rng = np.random.default_rng(7)
        z = rng.standard_normal(200)
        km = fit_kernel_margin(z)
        sigma = np.sqrt(np.mean((z - z.mean()) ** 2))
        assert km.b == pytest.approx(1.06 * sigma * 200 ** (-0.2), rel=1e-12)
        assert normal_reference_bandwidth(z) == km.b

    def test_unit_multipliers_identical(self):
        rng = np.random.default_rng(9)
        z = rng.standard_normal(40)
        a = fit_kernel_margin(z)
        b = fit_kernel_margin(z, m=np.ones(40))
        assert a.b == b.b
        grid = np.linspace(-3, 3, 15)
        np.testing.assert_array_equal(a.cdf(grid), b.cdf(grid))


class TestKernelCdfProperties:
    @pytest.fixture
    def km(self):
        z = np.random.default_rng(13).standard_normal(80) * 2.0 + 1.0
        return fit_kernel_margin(z)

    def test_monotone_and_bounded(self, km):
        # strict interior at +/- 5b; at +/- 10b the upper end saturates to
        # 1.0 in double precision, so only the limits are checked there
        lo5 = km.centers.min() - 5 * km.b
        hi5 = km.centers.max() + 5 * km.b
        grid = np.linspace(lo5, hi5, 400)
        vals = km.cdf(grid)
        assert np.all(np.diff(vals) >= 0.0)
        assert np.all((vals > 0.0) & (vals < 1.0))
        lo10 = km.centers.min() - 10 * km.b
        hi10 = km.centers.max() + 10 * km.b
        assert km.cdf(lo10) == pytest.approx(0.0, abs=1e-8)
        assert km.cdf(hi10) == pytest.approx(1.0, abs=1e-8)

    def test_b_to_zero_matches_empirical_cdf(self):
        z = np.random.default_rng(21).standard_normal(50)
        km = fit_kernel_margin(z, 1e-6 * np.ptp(z))
        zs = np.sort(z)
        mids = 0.5 * (zs[:-1] + zs[1:])
        ecdf = np.arange(1, 50) / 50.0
        np.testing.assert_allclose(km.cdf(mids), ecdf, atol=1e-6)

    def test_density_integrates_to_one(self, km):
        lo = km.centers.min() - 8 * km.b
        hi = km.centers.max() + 8 * km.b
        grid = np.linspace(lo, hi, 4000)
        total = np.trapezoid(km.pdf(grid), grid)
        assert total == pytest.approx(1.0, abs=1e-4)


class TestQuantile:
    def test_gaussian_median(self):
        assert margin_quantile(GaussianMargin(0.0, 1.0), 0.5) == pytest.approx(0.0)

    def test_kernel_symmetric_median(self):
        km = fit_kernel_margin(np.array([-1.0, 1.0]), 1.0)
        assert margin_quantile(km, 0.5) == pytest.approx(0.0, abs=1e-9)

    def test_gaussian_tail_against_newton_oracle(self):
        z975 = phi_inv_newton(0.975)
        assert z975 == pytest.approx(1.959964, abs=1e-6)
        got = margin_quantile(GaussianMargin(2.0, 3.0), 0.975)
        assert got == pytest.approx(2.0 + 3.0 * z975, abs=1e-9)
        assert got == pytest.approx(7.8799, abs=1e-3)

    @pytest.mark.parametrize("t", [0.01, 0.1, 0.5, 0.9, 0.99])
    def test_right_inverse(self, t):
        z = np.random.default_rng(3).standard_normal(60)
        km = fit_kernel_margin(z)
        y = margin_quantile(km, t)
        assert abs(km.cdf(y) - t) <= 1e-8

    def test_level_out_of_range(self):
        with pytest.raises(FitError):
            margin_quantile(GaussianMargin(0.0, 1.0), 0.0)
