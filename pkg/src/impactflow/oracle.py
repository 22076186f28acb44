"""Closed-form scaling predictions for every statistic the estimators measure.

Conventions: mu_m and beta_m are the duration-tail and impact-decay
exponents at the typical child volume q = exp(m_logq);

    mu_hat(a)  = mu_m + (a + 1/2) * lam * sigma^2      (covariance kernel)
    mu_tilde(a)= mu_m + 2 a * lam * sigma^2            (imbalance kernel)
    beta_hat(a)= max(0, beta_m - (a + 1/2) * lam' * sigma^2)

All functions are pure; nothing here touches a tape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.special import gamma as gamma_fn

from .errors import ConfigurationError, NumericalError
from .params import ModelParams
from .price import bracket_constant, impact_coefficient


def _mu_m(params: ModelParams) -> float:
    return params.mu1 + params.lam * params.m_logq


def _beta_m(params: ModelParams) -> float:
    if params.mode == "permanent":
        return 0.0
    return params.beta1 - params.lambda_prime * params.m_logq


def mu_tilde(params: ModelParams, a: float, log_T: float | None = None) -> float:
    """Effective imbalance exponent; pass log_T for the finite-T correction."""
    corr = 0.0 if log_T is None else 0.5 * params.lam * log_T
    return _mu_m(params) + params.lam * params.sigma_logq**2 * (2.0 * a - corr)


def mu_hat(params: ModelParams, a: float) -> float:
    return _mu_m(params) + (a + 0.5) * params.lam * params.sigma_logq**2


def beta_hat(params: ModelParams, a: float) -> float:
    return max(0.0, _beta_m(params) - (a + 0.5) * params.lambda_prime * params.sigma_logq**2)


def crossover_a(params: ModelParams, n: int = 1) -> float:
    """a_c(n): above it the 2n-th imbalance moment scales linearly in T."""
    lam_s2 = params.lam * params.sigma_logq**2
    mu_m = _mu_m(params)
    if lam_s2 <= 0.0:
        return math.inf
    return (1.0 - mu_m / (2.0 * n)) / lam_s2


@dataclass
class SigmaPrediction:
    diagonal: float
    off_diagonal: float
    a_c: float
    T_cross: float | None  # crossover to off-diagonal dominance, a > a_c(1) only


def predict_sigma_a_exponent(params: ModelParams, a: float, n: int = 1, log_T: float | None = None) -> SigmaPrediction:
    """Scaling exponents of Sigma_a^(2n)(T).

    Diagonal: 2n + 1 - mu_m - 2 n a lam sigma^2 below a_c(n), then 1.
    Off-diagonal: 2 - gamma_cross.  T_cross = exp(2 sigma^2 a^2) marks where
    the off-diagonal term overtakes, meaningful for a > a_c(1).
    """
    mu_m = _mu_m(params)
    if not (1.0 < mu_m < 2.0):
        raise ConfigurationError(f"predictions require mu_m in (1, 2), got {mu_m:.3f}")
    if n < 1:
        raise ConfigurationError("n must be >= 1")
    a_c = crossover_a(params, n)
    corr = 0.0 if log_T is None else 0.5 * params.lam * log_T
    diag = 2 * n + 1 - mu_m - 2 * n * params.lam * params.sigma_logq**2 * (a - corr / 2.0)
    if a >= a_c:
        diag = 1.0
    t_cross = math.exp(2.0 * params.sigma_logq**2 * a * a) if a > crossover_a(params, 1) else None
    return SigmaPrediction(diagonal=float(diag), off_diagonal=2.0 - params.gamma_cross, a_c=a_c, T_cross=t_cross)


@dataclass
class PriceVariancePrediction:
    diagonal: float
    off_diagonal: float
    zeta: dict  # n -> zeta_n


def predict_price_variance_exponent(params: ModelParams, orders=(1, 2, 3)) -> PriceVariancePrediction:
    """Exponents of E[Delta_T^2] and the higher price moments zeta_n.

    Single-size case: diagonal is 1 - gamma for gamma < 2 beta else
    1 - 2 beta (gamma = mu - 1); with volume fluctuations the diagonal is
    1 - 2 beta_m + 2 lam' sigma^2 and the off-diagonal picks up + lam' sigma^2.
    zeta_n = n (2 (1 - beta_eff) - gamma_cross) with beta_eff = beta_hat(0).
    """
    beta_m = _beta_m(params)
    s2 = params.sigma_logq**2
    if s2 == 0.0 or params.lambda_prime == 0.0:
        gamma_self = _mu_m(params) - 1.0
        diag = 1.0 - gamma_self if gamma_self < 2.0 * beta_m else 1.0 - 2.0 * beta_m
        od = 2.0 - params.gamma_cross - 2.0 * beta_m
    else:
        diag = 1.0 - 2.0 * beta_m + 2.0 * params.lambda_prime * s2
        od = 2.0 - params.gamma_cross - 2.0 * beta_m + params.lambda_prime * s2
    b_eff = beta_hat(params, 0.0)
    zeta = {int(n): float(n) * (2.0 * (1.0 - b_eff) - params.gamma_cross) for n in orders}
    return PriceVariancePrediction(diagonal=float(diag), off_diagonal=float(od), zeta=zeta)


@dataclass
class CovariancePrediction:
    diagonal: float
    off_diagonal: float
    informed: float
    a_c_prime: float


def covariance_crossover_a(params: ModelParams) -> float:
    """a_c' where the diagonal covariance branches cross, honoring the
    clipping of beta_hat at zero."""
    mu_m, beta_m = _mu_m(params), _beta_m(params)
    s2 = params.sigma_logq**2
    denom = (params.lam + params.lambda_prime) * s2
    if denom <= 0.0:
        return math.inf
    a = (1.5 - mu_m + beta_m) / denom - 0.5
    if beta_hat(params, a) == 0.0 and params.lam * s2 > 0:
        # right branch saturates at exponent 1: crossing solves 5/2 - mu_hat = 1
        a = (1.5 - mu_m) / (params.lam * s2) - 0.5
    return a


def predict_covariance_exponent(params: ModelParams, a: float) -> CovariancePrediction:
    """Exponents of E[Delta_T * I^a_T] per contribution.

    Diagonal: max(5/2 - mu_hat(a), 1 - beta_hat(a)) (the larger power
    dominates; they cross at a_c').  Off-diagonal: 2 - gamma_x - beta_hat(0).
    Informed: exactly 1 for mu_m > 1.
    """
    d = max(2.5 - mu_hat(params, a), 1.0 - beta_hat(params, a))
    od = 2.0 - params.gamma_cross - beta_hat(params, 0.0)
    return CovariancePrediction(
        diagonal=float(d),
        off_diagonal=float(od),
        informed=1.0,
        a_c_prime=covariance_crossover_a(params),
    )


@dataclass
class CorrelationPrediction:
    diagonal_T_exponent: float
    off_diagonal_T_exponent: float
    informed_T_exponent: float
    diagonal_prefactor: float      # exp(sigma^2 a (1-a) / 2)
    off_diagonal_prefactor: float  # exp(-sigma^2 a^2 / 2)
    ratio_half_over_zero: float    # R_{1/2} / R_0 in the diagonal regime
    ratio_one_over_zero: float     # R_1 / R_0 in the off-diagonal regime, at given T
    omega_diagonal: float
    omega_off_diagonal: float


def predict_correlation_shape(params: ModelParams, a: float, T: float) -> CorrelationPrediction:
    """Shape of R_a(T) = E[Delta * I^a] / (Sigma_T Sigma_a) per regime."""
    mu_m = _mu_m(params)
    s2 = params.sigma_logq**2
    lam_s2 = params.lam * s2
    a_c = crossover_a(params, 1)
    bh0 = beta_hat(params, 0.0)
    if a < a_c:
        diag_T = 0.5 * (1.0 - mu_m - lam_s2)
    else:
        diag_T = -beta_hat(params, a)
    od_T = 0.5 * mu_m + a * lam_s2 - params.gamma_cross - bh0
    inf_T = 0.5 * mu_m + a * lam_s2 - 1.0 if a < a_c else 0.0
    return CorrelationPrediction(
        diagonal_T_exponent=float(diag_T),
        off_diagonal_T_exponent=float(od_T),
        informed_T_exponent=float(inf_T),
        diagonal_prefactor=math.exp(0.5 * s2 * a * (1.0 - a)),
        off_diagonal_prefactor=math.exp(-0.5 * s2 * a * a),
        ratio_half_over_zero=math.exp(s2 / 8.0),
        ratio_one_over_zero=math.exp(s2 * (params.lam * math.log(T) - 0.5)),
        omega_diagonal=0.5 * (1.0 + lam_s2),
        omega_off_diagonal=1.0 - mu_m + params.gamma_cross + bh0,
    )


def correlation_two_term_model(a, T, A, B, sigma_l2, lam_sigma2):
    """R_a(T) template: exp(-s2 a^2/2) (A exp(s2 a / 2) + B exp(lam s2 a ln T))."""
    a = np.asarray(a, dtype=float)
    return np.exp(-0.5 * sigma_l2 * a**2) * (
        A * np.exp(0.5 * sigma_l2 * a) + B * np.exp(lam_sigma2 * a * np.log(T))
    )


def offdiag_variance_constant(beta: float, gamma_x: float, rtol: float = 1e-4) -> float:
    """C(beta, gamma_x): prefactor of the cross-metaorder volatility.

    Defined by the double integral of the post-execution decay profiles
    x^-beta of in-window initiation pairs under the |t - t'|^-gamma sign
    kernel, normalized per sigma^2 = C Gamma nu^2 tau0^gamma I1^2
    (E[s^(1/2+beta)])^2:

        C = iint_[0,1]^2 (u v)^-beta |u - v|^-gamma du dv

    evaluated by nested adaptive quadrature.  Converges for beta < 1 and
    gamma_x < 1.  At (0.2, 0.6) this is ~5.6.
    """
    if not (0.0 <= beta < 1.0 and 0.0 < gamma_x < 1.0):
        raise ConfigurationError("constant defined for beta in [0,1), gamma_x in (0,1)")

    def inner(u: float) -> float:
        def f(v: float) -> float:
            d = u - v
            if d <= 0.0 or v <= 0.0:
                return 0.0
            return v ** (-beta) * d ** (-gamma_x)

        val, err = quad(f, 0.0, u, points=[u], limit=200, epsrel=rtol / 10)
        return val

    def outer(u: float) -> float:
        return 0.0 if u <= 0.0 else u ** (-beta) * inner(u)

    val, err = quad(outer, 0.0, 1.0, limit=200, epsrel=rtol)
    if not np.isfinite(val) or val <= 0.0:
        raise NumericalError("off-diagonal constant quadrature failed")
    if err / val > 10 * rtol:
        raise NumericalError(f"off-diagonal constant quadrature above tolerance: rel err {err / val:.2e}")
    return 2.0 * val


def offdiag_variance_constant_closed_form(beta: float, gamma_x: float) -> float:
    """Beta-function closed form of the same constant (cross-check route)."""
    b = gamma_fn(1.0 - beta) * gamma_fn(1.0 - gamma_x) / gamma_fn(2.0 - beta - gamma_x)
    return 2.0 * b / (2.0 - 2.0 * beta - gamma_x)


@dataclass
class ImpactConstants:
    bracket_B: float
    I1_typical: float
    C_offdiag: float
    a_c: dict
    a_c_prime: float
    q2: float
    q0: float
    q_c_prime: float
    T_cross_a2: float
    sbar: float
    nbar: float
    tau0: float
    volume_flow: float
    Y_proportional: float | None


def impact_constants(params: ModelParams) -> ImpactConstants:
    """All closed-form constants and regime boundaries for a parameter set."""
    beta0 = beta_hat(params, 0.0)
    coef, _ = impact_coefficient(params.mean_q, params.phi_child, params)
    q2 = math.exp((2.0 - params.mu1) / params.lam) if params.lam > 0 else math.inf
    q0 = math.exp(params.beta1 / params.lambda_prime) if params.lambda_prime > 0 else math.inf
    lsum = params.lam + params.lambda_prime
    q_c_prime = math.exp((1.5 - params.mu1 + params.beta1) / lsum) if lsum > 0 else math.inf
    c_off = offdiag_variance_constant(beta0, params.gamma_cross)
    y = None
    if params.Gamma_amp > 0:
        y = params.nbar ** (0.5 - beta0) / math.sqrt(c_off * params.Gamma_amp)
    return ImpactConstants(
        bracket_B=bracket_constant(beta0),
        I1_typical=float(coef),
        C_offdiag=c_off,
        a_c={n: crossover_a(params, n) for n in (1, 2, 3)},
        a_c_prime=covariance_crossover_a(params),
        q2=q2,
        q0=q0,
        q_c_prime=q_c_prime,
        T_cross_a2=math.exp(2.0 * params.sigma_logq**2 * 4.0),
        sbar=params.sbar,
        nbar=params.nbar,
        tau0=params.tau0,
        volume_flow=params.volume_flow,
        Y_proportional=y,
    )


@dataclass
class PredictionSet:
    """Oracle predictions evaluated on an a-grid, ready for export."""

    a_grid: np.ndarray
    sigma_exponent: dict = field(default_factory=dict)       # n -> array over a
    sigma_offdiag_exponent: float = 0.0
    covariance_diagonal: np.ndarray | None = None
    covariance_off_diagonal: float = 0.0
    covariance_informed: float = 1.0
    price_variance: PriceVariancePrediction | None = None
    constants: ImpactConstants | None = None
    correlation_at: dict = field(default_factory=dict)       # T -> array over a (diag prefactor shape)


def build_prediction_set(params: ModelParams, a_grid, orders=(1, 2, 3), T_ref: float = 100.0) -> PredictionSet:
    a_grid = np.asarray(list(a_grid), dtype=float)
    ps = PredictionSet(a_grid=a_grid)
    for n in orders:
        ps.sigma_exponent[int(n)] = np.array([predict_sigma_a_exponent(params, a, n).diagonal for a in a_grid])
    ps.sigma_offdiag_exponent = 2.0 - params.gamma_cross
    ps.covariance_diagonal = np.array([predict_covariance_exponent(params, a).diagonal for a in a_grid])
    ps.covariance_off_diagonal = predict_covariance_exponent(params, 0.0).off_diagonal
    ps.price_variance = predict_price_variance_exponent(params, orders)
    ps.constants = impact_constants(params)
    shp = [predict_correlation_shape(params, a, T_ref).diagonal_prefactor for a in a_grid]
    ps.correlation_at[T_ref] = np.asarray(shp)
    return ps
