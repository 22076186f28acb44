import math

import numpy as np
import pytest

from impactflow import (
    ConfigurationError,
    ModelParams,
    bracket_constant,
    crossover_a,
    impact_constants,
    offdiag_variance_constant,
    offdiag_variance_constant_closed_form,
    predict_correlation_shape,
    predict_covariance_exponent,
    predict_price_variance_exponent,
    predict_sigma_a_exponent,
)
from impactflow.oracle import beta_hat, covariance_crossover_a, mu_hat, mu_tilde


def defaults():
    # mu_m = 1.5, lam sigma^2 = 0.125, beta_m = 0.3, lam' sigma^2 = 0.1
    return ModelParams(
        mu1=1.5, lam=0.125, m_logq=0.0, sigma_logq=1.0,
        beta1=0.3, lambda_prime=0.1, gamma_cross=0.6, mu_floor=1.05,
    )


class TestSigmaExponents:
    def test_sign_imbalance_baseline(self):
        assert predict_sigma_a_exponent(defaults(), 0.0, 1).diagonal == pytest.approx(1.5)

    def test_crossover_value(self):
        p = defaults()
        assert crossover_a(p, 1) == pytest.approx(2.0)
        sp = predict_sigma_a_exponent(p, 2.0, 1)
        assert sp.diagonal == pytest.approx(1.0)

    def test_intermediate_a(self):
        assert predict_sigma_a_exponent(defaults(), 1.0, 1).diagonal == pytest.approx(1.25)

    def test_higher_order_crossovers(self):
        p = defaults()
        assert crossover_a(p, 2) == pytest.approx((1 - 1.5 / 4) / 0.125)  # = 5
        assert crossover_a(p, 3) == pytest.approx((1 - 1.5 / 6) / 0.125)  # = 6

    def test_offdiagonal(self):
        assert predict_sigma_a_exponent(defaults(), 0.0, 1).off_diagonal == pytest.approx(1.4)

    def test_T_cross(self):
        # e^(2 sigma^2 a^2) at a = 2, sigma^2 = 1 -> e^8
        sp = predict_sigma_a_exponent(defaults(), 2.5, 1)
        assert sp.T_cross == pytest.approx(math.exp(2 * 2.5**2))
        assert predict_sigma_a_exponent(defaults(), 0.5, 1).T_cross is None

    def test_continuity_at_crossover(self):
        p = defaults()
        for n in (1, 2, 3):
            ac = crossover_a(p, n)
            below = predict_sigma_a_exponent(p, ac - 1e-9, n).diagonal
            assert below == pytest.approx(1.0, abs=1e-6)

    def test_domain(self):
        with pytest.raises(ConfigurationError):
            predict_sigma_a_exponent(ModelParams(mu1=2.5, lam=0.0, sigma_logq=0.0), 0.0, 1)


class TestPriceVariance:
    def test_single_size_subdiffusive(self):
        p = ModelParams(mu1=1.5, lam=0.0, sigma_logq=0.0, beta1=0.2, lambda_prime=0.0, gamma_cross=0.6)
        pv = predict_price_variance_exponent(p)
        assert pv.diagonal == pytest.approx(0.6)  # gamma = 0.5 > 2 beta = 0.4

    def test_single_size_gamma_small(self):
        p = ModelParams(mu1=1.3, lam=0.0, sigma_logq=0.0, beta1=0.2, lambda_prime=0.0)
        assert predict_price_variance_exponent(p).diagonal == pytest.approx(1.0 - 0.3)

    def test_offdiag_diffusive_at_matched_exponents(self):
        p = ModelParams(mu1=1.5, lam=0.0, sigma_logq=0.0, beta1=0.2, lambda_prime=0.0, gamma_cross=0.6)
        assert predict_price_variance_exponent(p).off_diagonal == pytest.approx(1.0)

    def test_zeta_n(self):
        p = ModelParams(mu1=1.5, lam=0.0, sigma_logq=0.0, beta1=0.2, lambda_prime=0.0, gamma_cross=0.6)
        z = predict_price_variance_exponent(p).zeta
        assert z[2] == pytest.approx(2.0)
        assert z[3] == pytest.approx(3.0)

    def test_volume_fluctuation_formulas(self):
        p = defaults()
        pv = predict_price_variance_exponent(p)
        assert pv.diagonal == pytest.approx(1 - 2 * 0.3 + 2 * 0.1)
        assert pv.off_diagonal == pytest.approx(2 - 0.6 - 0.6 + 0.1)


class TestCovariance:
    def test_diagonal_at_zero(self):
        cp = predict_covariance_exponent(defaults(), 0.0)
        assert cp.diagonal == pytest.approx(2.5 - 1.5625)

    def test_offdiagonal_value(self):
        # gamma_x = 0.6 and beta_hat(0) = 0.2 -> 1.2
        p = ModelParams(
            mu1=1.5, lam=0.125, sigma_logq=1.0, beta1=0.25, lambda_prime=0.1,
            gamma_cross=0.6, mu_floor=1.05,
        )
        assert beta_hat(p, 0.0) == pytest.approx(0.2)
        assert predict_covariance_exponent(p, 1.0).off_diagonal == pytest.approx(1.2)

    def test_informed_is_one(self):
        for a in (0.0, 1.0, 2.7):
            assert predict_covariance_exponent(defaults(), a).informed == 1.0

    def test_non_monotone_with_interior_minimum(self):
        p = defaults()
        ac = covariance_crossover_a(p)
        assert 0.0 < ac < 3.0
        grid = np.linspace(0, 3, 61)
        vals = [predict_covariance_exponent(p, a).diagonal for a in grid]
        k = int(np.argmin(vals))
        assert 0 < k < len(grid) - 1
        assert grid[k] == pytest.approx(ac, abs=0.1)
        # left slope -lam sigma^2, right slope +lam' sigma^2 (before the clip)
        left = (vals[4] - vals[0]) / (grid[4] - grid[0])
        assert left == pytest.approx(-0.125, abs=1e-9)

    def test_degenerate_sigma_zero(self):
        p = ModelParams(mu1=1.5, lam=0.0, sigma_logq=0.0, beta1=0.2, lambda_prime=0.0)
        vals = [predict_covariance_exponent(p, a).diagonal for a in (0.0, 1.0, 2.0)]
        assert vals[0] == vals[1] == vals[2]


class TestCorrelation:
    def test_omega_diagonal(self):
        # (1 + lam sigma^2)/2 = 0.5625 at lam sigma^2 = 1/8
        cs = predict_correlation_shape(defaults(), 0.0, 100.0)
        assert cs.omega_diagonal == pytest.approx(0.5625)

    def test_omega_offdiagonal(self):
        # 1 - mu_m + gamma_x + beta_hat(0) = 0.30 at the quoted defaults
        p = ModelParams(
            mu1=1.5, lam=0.125, sigma_logq=1.0, beta1=0.25, lambda_prime=0.1,
            gamma_cross=0.6, mu_floor=1.05,
        )
        cs = predict_correlation_shape(p, 0.0, 100.0)
        assert cs.omega_off_diagonal == pytest.approx(0.30)

    def test_ratio_half_over_zero(self):
        cs = predict_correlation_shape(defaults(), 0.5, 100.0)
        assert cs.ratio_half_over_zero == pytest.approx(math.exp(1.0 / 8.0))

    def test_ratio_one_over_zero_matches_quoted_value(self):
        # sigma^2 = 2, lam sigma^2 = 1/2, T = 100 -> e^(2(0.25 ln 100 - 0.5)) ~ 3.68
        p = ModelParams(mu1=1.5, lam=0.25, sigma_logq=math.sqrt(2.0), mu_floor=1.05)
        cs = predict_correlation_shape(p, 1.0, 100.0)
        assert cs.ratio_one_over_zero == pytest.approx(3.679, abs=0.01)

    def test_diagonal_prefactor_peaks_at_half(self):
        p = defaults()
        grid = np.linspace(0, 1.5, 31)
        pref = [predict_correlation_shape(p, a, 100.0).diagonal_prefactor for a in grid]
        assert grid[int(np.argmax(pref))] == pytest.approx(0.5, abs=0.05)


class TestConstants:
    def test_bracket_B_zero(self):
        assert bracket_constant(0.0) == pytest.approx(2.0, abs=1e-14)

    def test_bracket_B_02(self):
        assert bracket_constant(0.2) == pytest.approx(1.70525, abs=1e-3)

    def test_offdiag_constant_quadrature_vs_closed_form(self):
        for beta, gam in ((0.2, 0.6), (0.1, 0.5), (0.3, 0.7)):
            q = offdiag_variance_constant(beta, gam)
            c = offdiag_variance_constant_closed_form(beta, gam)
            assert q == pytest.approx(c, rel=2e-4)

    def test_offdiag_constant_reference_value(self):
        assert offdiag_variance_constant(0.2, 0.6) == pytest.approx(5.6, abs=0.3)

    def test_constants_bundle(self):
        p = ModelParams(
            mu1=1.5, lam=0.125, sigma_logq=1.0, beta1=0.25, lambda_prime=0.1,
            gamma_cross=0.6, mu_floor=1.05,
        )
        cst = impact_constants(p)
        assert cst.q2 == pytest.approx(math.exp((2 - 1.5) / 0.125))
        assert cst.q0 == pytest.approx(math.exp(0.25 / 0.1))
        assert cst.q_c_prime == pytest.approx(math.exp((1.5 - 1.5 + 0.25) / 0.225))
        assert cst.T_cross_a2 == pytest.approx(math.exp(8.0))
        assert cst.a_c[1] == pytest.approx(2.0)
        assert cst.sbar > 0 and cst.nbar > 0 and cst.tau0 > 0

    def test_single_size_reduction(self):
        # lam = lam' = 0 removes all a dependence
        p = ModelParams(mu1=1.5, lam=0.0, sigma_logq=1.0, beta1=0.2, lambda_prime=0.0)
        e0 = predict_sigma_a_exponent(p, 0.0, 1).diagonal
        e2 = predict_sigma_a_exponent(p, 2.0, 1).diagonal
        assert e0 == e2 == pytest.approx(1.5)
        assert mu_tilde(p, 1.7) == pytest.approx(1.5)
        assert mu_hat(p, 1.7) == pytest.approx(1.5)
