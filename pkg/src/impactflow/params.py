"""Model parameters and derived flow quantities.

A single `ModelParams` instance carries everything that defines one market:
the metaorder initiation rate `nu`, the per-metaorder child execution rate
`phi_child`, the Pareto duration law (minimum `s0`, tail exponent
``mu_q = mu1 + lam * ln q`` clipped from below at `mu_floor`), the log-normal
child-volume law (location `m_logq`, scale `sigma_logq`), cross-metaorder
sign correlations (`Gamma_amp`, `gamma_cross`), the impact kernel
(``beta_q = max(0, beta1 - lambda_prime * ln q)``, scale `theta0`, mode),
and the noise/information channel (`z_inf`, `sigma_F`, `rho`, `psi`).

Derived quantities (`sbar`, `tau0`, `nbar`, volume flow) are computed by
numerical integration over the child-volume law so that the q-dependence of
the duration tail is accounted for exactly.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, fields, replace

import numpy as np
from scipy.integrate import quad
from scipy.special import erfinv

from .errors import ConfigurationError

MODES = ("standard", "two_time", "permanent")

# quantile used by the strict duration-tail validity check
_TAIL_QUANTILE = 1e-6


def _norm_ppf(p: float) -> float:
    return math.sqrt(2.0) * float(erfinv(2.0 * p - 1.0))


@dataclass
class ModelParams:
    """All generative parameters of the flow/impact model."""

    nu: float = 1.0              # metaorder initiations per unit time
    phi_child: float = 10.0      # child executions per unit time per metaorder
    s0: float = 1.0              # minimum metaorder duration
    mu1: float = 1.5             # duration tail exponent at q = 1 lot
    lam: float = 0.125           # slope of mu_q in ln q
    m_logq: float = 0.0          # location of ln q
    sigma_logq: float = 1.0      # scale of ln q
    gamma_cross: float = 0.6     # cross-metaorder sign correlation exponent
    Gamma_amp: float = 0.1       # cross-correlation amplitude at lag 1 (0 = iid signs)
    beta1: float = 0.3           # impact decay exponent at q = 1 lot
    lambda_prime: float = 0.1    # slope of beta_q in ln q
    n0: float = 5.0              # detection threshold in child-order count
    theta0: float = 1.0          # single-trade impact scale (price per sqrt lot)
    z_inf: float = 0.0           # permanent random-impact amplitude
    sigma_F: float = 0.0         # fundamental volatility
    rho: float = 0.0             # information correlation, in [0, 1)
    psi: float = 0.0             # informed-size exponent
    seed: int = 7
    mode: str = "two_time"
    # Tail floor for mu_q.  With lam > 0 an unbounded log-normal always
    # reaches mu_q <= 1 somewhere in its left tail, which makes the exact
    # mean duration diverge; the floor keeps the flow stationary.  Set to
    # None to enforce the strict quantile-range rejection rule instead.
    mu_floor: float | None = 1.05

    tau0: float = field(init=False, default=0.0)  # mean time between trades

    def __post_init__(self) -> None:
        self.validate()
        self.tau0 = 1.0 / (self.nu * self.phi_child * self.sbar) if self.nu > 0 else math.inf

    # -- validation ----------------------------------------------------

    def validate(self) -> None:
        if self.nu < 0:
            raise ConfigurationError("nu must be >= 0")
        if self.phi_child <= 0:
            raise ConfigurationError("phi_child must be > 0")
        if self.s0 <= 0:
            raise ConfigurationError("s0 must be > 0")
        if self.mu1 <= 1.0:
            raise ConfigurationError(f"mu1 must be > 1 (finite mean duration), got {self.mu1}")
        if self.sigma_logq < 0:
            raise ConfigurationError("sigma_logq must be >= 0")
        if self.Gamma_amp < 0:
            raise ConfigurationError("Gamma_amp must be >= 0")
        if not (0.0 < self.gamma_cross <= 2.0):
            raise ConfigurationError("gamma_cross must be in (0, 2]")
        if not (0.0 <= self.rho < 1.0):
            raise ConfigurationError("rho must be in [0, 1)")
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "two_time" and not (0.0 <= self.beta1 < 0.5):
            raise ConfigurationError("beta1 must be in [0, 1/2) in two_time mode")
        if self.mode == "standard" and not (0.0 <= self.beta1 < 1.0):
            raise ConfigurationError("beta1 must be in [0, 1) in standard mode")
        if self.sigma_F < 0 or self.theta0 < 0 or self.z_inf < 0:
            raise ConfigurationError("theta0, z_inf, sigma_F must be >= 0")
        if self.mu_floor is not None and self.mu_floor <= 1.0:
            raise ConfigurationError("mu_floor must be > 1 when set")
        if self.mu_floor is None:
            # strict rule: mu_q must stay > 1 over the central quantile
            # range of the child-volume law, otherwise mean durations
            # diverge for reachable q.
            for p in (_TAIL_QUANTILE, 1.0 - _TAIL_QUANTILE):
                ell = self.m_logq + self.sigma_logq * _norm_ppf(p)
                if self.mu_ell(ell) <= 1.0:
                    raise ConfigurationError(
                        f"mu_q <= 1 at the {p:g} quantile of the child-volume law "
                        f"(ln q = {ell:.3f}); set mu_floor or adjust mu1/lam/sigma_logq"
                    )

    # -- q-dependent exponents -----------------------------------------

    def mu_ell(self, ell):
        """Duration tail exponent as a function of ell = ln q."""
        mu = self.mu1 + self.lam * np.asarray(ell, dtype=float)
        if self.mu_floor is not None:
            mu = np.maximum(mu, self.mu_floor)
        return mu if np.ndim(ell) else float(mu)

    def mu_q(self, q):
        return self.mu_ell(np.log(q))

    def beta_ell(self, ell):
        """Impact decay exponent as a function of ell = ln q (clipped at 0)."""
        if self.mode == "permanent":
            b = np.zeros_like(np.asarray(ell, dtype=float))
        else:
            b = np.maximum(0.0, self.beta1 - self.lambda_prime * np.asarray(ell, dtype=float))
        return b if np.ndim(ell) else float(b)

    def beta_q(self, q):
        return self.beta_ell(np.log(q))

    def sbar_ell(self, ell):
        """Mean duration conditional on ln q."""
        mu = self.mu_ell(ell)
        return mu / (mu - 1.0) * self.s0

    # -- derived flow quantities ---------------------------------------

    def _expect_over_logq(self, f) -> float:
        """E[f(ell)] under ell ~ N(m_logq, sigma_logq^2)."""
        m, s = self.m_logq, self.sigma_logq
        if s == 0.0:
            return float(f(m))
        pts = [m]
        if self.mu_floor is not None and self.lam != 0.0:
            kink = (self.mu_floor - self.mu1) / self.lam
            if abs(kink - m) < 9 * s:
                pts.append(kink)
        if self.lambda_prime != 0.0:
            kink = self.beta1 / self.lambda_prime
            if abs(kink - m) < 9 * s:
                pts.append(kink)
        lo, hi = m - 10 * s, m + 10 * s
        pts = sorted(p for p in set(pts) if lo < p < hi)

        def integrand(ell):
            z = (ell - m) / s
            return f(ell) * math.exp(-0.5 * z * z) / (s * math.sqrt(2 * math.pi))

        total = 0.0
        edges = [lo, *pts, hi]
        for a, b in zip(edges[:-1], edges[1:]):
            val, _ = quad(integrand, a, b, limit=200)
            total += val
        return total

    @property
    def sbar(self) -> float:
        """Mean metaorder duration E_q[mu_q/(mu_q - 1)] * s0."""
        return self._expect_over_logq(self.sbar_ell)

    @property
    def nbar(self) -> float:
        """Mean child orders per metaorder, phi * sbar."""
        return self.phi_child * self.sbar

    @property
    def mean_q(self) -> float:
        return math.exp(self.m_logq + 0.5 * self.sigma_logq**2)

    @property
    def volume_flow(self) -> float:
        """Mean executed volume per unit time, nu * phi * E[q * sbar_q].

        The expectation keeps the coupling between q and the duration tail;
        it factorises into nu * qbar * phi * sbar only when lam = 0.
        """
        return self.nu * self.phi_child * self._expect_over_logq(
            lambda ell: math.exp(ell) * self.sbar_ell(ell)
        )

    # -- misc ------------------------------------------------------------

    def with_updates(self, **kw) -> "ModelParams":
        return replace(self, **kw)

    def content_hash(self) -> str:
        parts = []
        for f in fields(self):
            if f.init:
                parts.append(f"{f.name}={getattr(self, f.name)!r}")
        return hashlib.sha256(";".join(parts).encode()).hexdigest()[:16]


def stream(seed: int, *key) -> np.random.Generator:
    """Deterministic splittable random stream.

    Distinct `key` tuples give statistically independent generators; the
    same (seed, key) always yields the same stream regardless of how many
    other streams were created, so parallel realizations are reproducible
    independent of scheduling.
    """
    ints = []
    for k in key:
        if isinstance(k, str):
            h = hashlib.sha256(k.encode()).digest()[:8]
            ints.append(int.from_bytes(h, "little"))
        else:
            ints.append(int(k) & 0xFFFFFFFFFFFFFFFF)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *ints])))
