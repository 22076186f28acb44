"""Stochastic ingredients: durations, child volumes, correlated signs.

All samplers are pure functions of an explicit `numpy.random.Generator`,
so a fixed (seed, stream) pair reproduces output bitwise.

The correlated sign generator synthesises a stationary Gaussian sequence
with autocovariance ``rho(k) = min(1, Gamma * k**-gamma)`` by exact
circulant embedding (FFT spectral synthesis) and takes signs.  For jointly
Gaussian pairs the sign correlation follows the arcsine law,
``C(k) = (2/pi) * arcsin(rho(k))``, which preserves the power-law exponent
and shrinks the amplitude by ~2/pi in the small-correlation regime.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .params import ModelParams


def sample_child_volume(params: ModelParams, rng: np.random.Generator, size=None):
    """Draw child volumes q = exp(m + sigma * g), g standard normal.

    sigma_logq = 0 degenerates to the constant exp(m_logq).
    """
    if params.sigma_logq == 0.0:
        q = np.exp(params.m_logq)
        return q if size is None else np.full(size, q)
    g = rng.standard_normal(size)
    return np.exp(params.m_logq + params.sigma_logq * g)


def sample_duration(params: ModelParams, q, rng: np.random.Generator, size=None):
    """Draw metaorder durations from the Pareto law Psi_q(s) = mu_q s0^mu_q s^-(1+mu_q).

    Inverse-CDF sampling: s = s0 * u**(-1/mu_q) with u uniform in (0, 1].
    Raises ConfigurationError when the (un-floored) tail exponent is <= 1
    for the given q and no floor is configured.
    """
    mu = params.mu1 + params.lam * np.log(q)
    if params.mu_floor is not None:
        mu = np.maximum(mu, params.mu_floor)
    elif np.any(np.asarray(mu) <= 1.0):
        raise ConfigurationError("mu_q <= 1 for a requested q: infinite mean duration")
    if size is None and np.ndim(q) > 0:
        size = np.shape(q)
    u = 1.0 - rng.random(size)  # in (0, 1]
    return params.s0 * u ** (-1.0 / mu)


def sample_sizebiased_duration(params: ModelParams, q, rng: np.random.Generator, size=None):
    """Draw from the size-biased duration density s * Psi_q(s) / sbar_q.

    For the Pareto law this is again Pareto with exponent mu_q - 1; it is
    the duration law of metaorders alive at a stationary time point.
    """
    mu = params.mu_q(q)
    if np.any(np.asarray(mu) <= 1.0):
        raise ConfigurationError("size-biased sampling requires mu_q > 1")
    if size is None and np.ndim(q) > 0:
        size = np.shape(q)
    u = 1.0 - rng.random(size)
    return params.s0 * u ** (-1.0 / (np.asarray(mu) - 1.0))


def sign_correlation_target(lag, params: ModelParams):
    """Analytic sign autocorrelation of the generator at a given lag.

    Equals (2/pi) * arcsin(min(1, Gamma * lag**-gamma)); lag is the
    metaorder initiation-index lag.
    """
    k = np.asarray(lag, dtype=float)
    if np.any(k < 1):
        raise ConfigurationError("lag must be >= 1")
    rho = np.minimum(1.0, params.Gamma_amp * k ** (-params.gamma_cross))
    out = 2.0 / np.pi * np.arcsin(rho)
    return out if np.ndim(lag) else float(out)


@dataclass
class SignSequence:
    """Metaorder signs in initiation order plus generator diagnostics."""

    signs: np.ndarray                      # int8, each entry in {-1, +1}
    realized_amplitude: float = 0.0        # measured lag-1 sign autocorrelation
    clipped_spectral_mass: float = 0.0     # |negative eigenvalue mass| / total, 0 if embeddable
    target_amplitude: float = 0.0          # analytic lag-1 target after arcsine mapping
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.signs.size


def _circulant_eigenvalues(rho: np.ndarray) -> np.ndarray:
    """Eigenvalues of the minimal circulant embedding of [1, rho_1..rho_m]."""
    m = rho.size
    row = np.concatenate(([1.0], rho[: m - 1], [rho[m - 1]], rho[m - 2 :: -1]))
    return np.fft.rfft(row).real


def generate_correlated_signs(n: int, params: ModelParams, rng: np.random.Generator) -> SignSequence:
    """Generate n metaorder signs with power-law cross correlations.

    Gamma_amp = 0 returns i.i.d. fair signs.  Otherwise the target Gaussian
    autocovariance is rho(k) = min(1, Gamma * k**-gamma); when the circulant
    spectrum of the target is not non-negative (large Gamma), negative
    eigenvalues are clipped to zero and the clipped mass is reported in
    `clipped_spectral_mass`.
    """
    if n < 1:
        raise ConfigurationError("n must be >= 1")
    if params.Gamma_amp == 0.0:
        signs = np.where(rng.random(n) < 0.5, -1, 1).astype(np.int8)
        seq = SignSequence(signs=signs, target_amplitude=0.0)
        seq.realized_amplitude = _lag1(signs)
        return seq
    if not (0.0 < params.gamma_cross < 2.0):
        raise ConfigurationError("correlated signs require gamma_cross in (0, 2)")

    # pad the embedding 4x past the requested length: the circulant
    # covariance wraps around (rho(2m - k) leaks in), and with long-memory
    # targets that adds a correlation floor between all pairs unless the
    # circle is much longer than the sequence actually used.
    m = 1 << max(2, int(np.ceil(np.log2(max(n, 2)))) + 2)
    k = np.arange(1, m + 1, dtype=float)
    rho = np.minimum(1.0, params.Gamma_amp * k ** (-params.gamma_cross))
    lam = _circulant_eigenvalues(rho)
    neg = lam < 0.0
    clipped = float(-lam[neg].sum() / np.abs(lam).sum()) if neg.any() else 0.0
    lam = np.maximum(lam, 0.0)

    # Hermitian spectral synthesis (Davies-Harte): interior bins get complex
    # noise of variance lam*M/2 per component, DC and Nyquist real noise of
    # variance lam*M (M = 2m is the embedding length).
    u = rng.standard_normal(m + 1)
    v = rng.standard_normal(m + 1)
    coeff = np.sqrt(lam * m) * (u + 1j * v)
    coeff[0] = np.sqrt(lam[0] * 2 * m) * u[0]
    coeff[m] = np.sqrt(lam[m] * 2 * m) * u[m]
    g = np.fft.irfft(coeff, n=2 * m)[:n]
    signs = np.where(g >= 0.0, 1, -1).astype(np.int8)

    seq = SignSequence(
        signs=signs,
        clipped_spectral_mass=clipped,
        target_amplitude=float(sign_correlation_target(1, params)),
        meta={"embedding_length": 2 * m},
    )
    seq.realized_amplitude = _lag1(signs)
    return seq


def _lag1(signs: np.ndarray) -> float:
    if signs.size < 2:
        return 0.0
    s = signs.astype(np.float64)
    return float(np.mean(s[:-1] * s[1:]))


def sign_autocorrelation(signs: np.ndarray, lags) -> np.ndarray:
    """Empirical autocorrelation E[s_t s_{t+k}] of a +-1 sequence at given lags."""
    s = np.asarray(signs, dtype=np.float64)
    out = np.empty(len(lags))
    for i, k in enumerate(lags):
        k = int(k)
        out[i] = float(np.dot(s[:-k], s[k:]) / (s.size - k)) if 0 < k < s.size else np.nan
    return out
