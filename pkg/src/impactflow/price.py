"""Price-path assembly from metaorder impact trajectories.

Three propagator modes:

* ``two_time``  -- square-root growth I1*sqrt(t) during execution and decay
  I1*sqrt(s)*[(t/s)^(1-b) - (t/s-1)^(1-b)] afterwards, with
  I1 = B_b * sqrt(phi~) * theta0*sqrt(q) * (phi~*tau0)^b and
  B_b = 2*Gamma(1/2+b)*Gamma(1-b)/sqrt(pi).
* ``standard``  -- I0 * t^(1-b) growth and I0*[t^(1-b) - (t-s)^(1-b)] decay,
  I0 = phi~ * theta0*sqrt(q) * tau0^b / (1-b).
* ``permanent`` -- the b = 0 limit of two_time: the peak I1*sqrt(s) never
  decays.

The assembled path has three additive components: the deterministic impact
sum, a permanent random-impact term (one frozen sqrt-profile per metaorder,
amplitude z_inf, one standard-normal eta per metaorder), and a fundamental
component (diffusion in trade time plus informed steps at initiations).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gamma as gamma_fn

from ._accel import MODE_STANDARD, MODE_TWO_TIME, impact_sweep
from .errors import ConfigurationError
from .flow import Metaorder, TradeTape
from .params import ModelParams, stream


def bracket_constant(beta: float) -> float:
    """B_beta = 2*Gamma(1/2+beta)*Gamma(1-beta)/sqrt(pi); equals 2 at beta=0."""
    return float(2.0 * gamma_fn(0.5 + beta) * gamma_fn(1.0 - beta) / np.sqrt(np.pi))


def impact_coefficient(q, phi_tilde, params: ModelParams, mode: str | None = None):
    """Per-metaorder impact scale and decay exponent.

    Returns (coef, beta_q).  In two_time/permanent mode coef is I1; in
    standard mode it is I0.
    """
    mode = mode or params.mode
    q = np.asarray(q, dtype=float)
    theta = params.theta0 * np.sqrt(q)
    if mode == "permanent":
        beta = np.zeros_like(q)
        coef = 2.0 * np.sqrt(phi_tilde) * theta
    elif mode == "two_time":
        beta = np.maximum(0.0, params.beta1 - params.lambda_prime * np.log(q))
        bb = 2.0 * gamma_fn(0.5 + beta) * gamma_fn(1.0 - beta) / np.sqrt(np.pi)
        coef = bb * np.sqrt(phi_tilde) * theta * (phi_tilde * params.tau0) ** beta
    elif mode == "standard":
        beta = np.maximum(0.0, params.beta1 - params.lambda_prime * np.log(q))
        if np.any(beta >= 1.0):
            raise ConfigurationError("standard mode requires beta < 1")
        coef = phi_tilde * theta * params.tau0**beta / (1.0 - beta)
    else:
        raise ConfigurationError(f"unknown mode {mode!r}")
    return coef, beta


def _trajectory(elapsed, duration, coef, beta, mode: str):
    """Trajectory value(s) at given elapsed times since metaorder start."""
    el = np.asarray(elapsed, dtype=float)
    out = np.zeros_like(el)
    act = (el > 0.0) & (el <= duration)
    post = el > duration
    if mode in ("two_time", "permanent"):
        out[act] = coef * np.sqrt(el[act])
        if post.any():
            x = el[post] / duration
            out[post] = coef * np.sqrt(duration) * (x ** (1.0 - beta) - (x - 1.0) ** (1.0 - beta))
    else:
        omb = 1.0 - beta
        out[act] = coef * el[act] ** omb
        if post.any():
            out[post] = coef * (el[post] ** omb - (el[post] - duration) ** omb)
    return out


def impact_trajectory_value(metaorder: Metaorder, elapsed, params: ModelParams, mode: str | None = None):
    """Price contribution of one metaorder at `elapsed` time since its start.

    Continuous at elapsed = duration; zero at elapsed <= 0.  The sign is not
    applied here (trajectories are reported for a buy metaorder).
    """
    mode = mode or params.mode
    if np.any(np.asarray(elapsed) < 0):
        raise ConfigurationError("elapsed must be >= 0")
    coef, beta = impact_coefficient(metaorder.child_volume, metaorder.participation, params, mode)
    out = _trajectory(elapsed, metaorder.duration, float(coef), float(beta), mode)
    return out if np.ndim(elapsed) else float(out)


def peak_impact(metaorder: Metaorder, params: ModelParams, mode: str | None = None) -> float:
    """Impact at the end of execution (elapsed = duration)."""
    return float(impact_trajectory_value(metaorder, metaorder.duration, params, mode))


@dataclass
class PricePath:
    """Price values on a trade-index grid, split into components."""

    grid: np.ndarray          # trade indices, sorted, in [0, n_trades)
    times: np.ndarray         # wall time of each grid point
    impact_mean: np.ndarray   # deterministic impact component
    impact_noise: np.ndarray  # permanent random-impact component
    fundamental: np.ndarray   # diffusion + informed steps

    @property
    def total(self) -> np.ndarray:
        return self.impact_mean + self.impact_noise + self.fundamental

    def positions_of(self, trade_idx) -> np.ndarray:
        """Positions of the given trade indices in this path's grid."""
        pos = np.searchsorted(self.grid, trade_idx)
        ok = (pos < self.grid.size) & (self.grid[np.minimum(pos, self.grid.size - 1)] == trade_idx)
        if not np.all(ok):
            raise ConfigurationError("requested trade index missing from price grid")
        return pos


def fundamental_path(tape: TradeTape, params: ModelParams, grid_idx: np.ndarray, rng: np.random.Generator):
    """Fundamental component on the grid: trade-time diffusion plus
    permanent informed steps.

    Each metaorder initiation adds a step c * sign * q^psi with
    c = rho * sigma_F * sqrt(phi~ * sbar) (the per-trade initiation rate is
    1/(phi~*sbar)); the diffusive variance per trade is reduced to
    sigma_F^2 (1 - rho^2) so the total fundamental variance stays
    sigma_F^2 * T for uncorrelated signs.
    """
    grid_idx = np.asarray(grid_idx, dtype=np.int64)
    if params.sigma_F == 0.0:
        return np.zeros(grid_idx.size)
    var_diff = params.sigma_F**2 * (1.0 - params.rho**2)
    dn = np.diff(grid_idx, prepend=0)
    diff = np.cumsum(rng.standard_normal(grid_idx.size) * np.sqrt(var_diff * dn))
    if params.rho == 0.0 or tape.metaorders is None:
        return diff
    mt = tape.metaorders
    c = params.rho * params.sigma_F * np.sqrt(params.phi_child * params.sbar)
    order = np.argsort(mt.start_times, kind="stable")
    st = mt.start_times[order]
    w = c * mt.signs[order].astype(float) * mt.child_volumes[order] ** params.psi
    cum = np.concatenate(([0.0], np.cumsum(w)))
    steps = cum[np.searchsorted(st, tape.times[grid_idx], side="right")]
    return diff + steps


def assemble_price_path(
    tape: TradeTape,
    grid_idx: np.ndarray,
    params: ModelParams | None = None,
    mode: str | None = None,
    seed: int | None = None,
) -> PricePath:
    """Assemble the full price path on a grid of trade indices.

    Pure function of (tape, params, seed): the per-metaorder impact noise
    eta is keyed by metaorder id, the fundamental stream by the seed alone.
    Complexity O(n_metaorders * len(grid)).
    """
    params = params or tape.params
    if params is None:
        raise ConfigurationError("price assembly needs model parameters")
    if tape.metaorders is None:
        raise ConfigurationError("price assembly needs the metaorder registry")
    mode = mode or params.mode
    grid_idx = np.asarray(grid_idx, dtype=np.int64)
    if grid_idx.size and (grid_idx[0] < 0 or grid_idx[-1] >= tape.n_trades):
        raise ConfigurationError("grid indices outside tape range")
    seed = params.seed if seed is None else seed
    grid_t = tape.times[grid_idx]

    mt = tape.metaorders
    coef, beta = impact_coefficient(mt.child_volumes, mt.participation, params, mode)
    coef = np.atleast_1d(np.asarray(coef, dtype=float))
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    if mode == "permanent":
        kmode, omb = MODE_TWO_TIME, 1.0 - beta
    elif mode == "two_time":
        kmode, omb = MODE_TWO_TIME, 1.0 - beta
    else:
        kmode, omb = MODE_STANDARD, 1.0 - beta

    eta = stream(seed, "impact-noise").standard_normal(len(mt))
    w_det = mt.signs.astype(float) * coef if params.theta0 != 0.0 else np.zeros(len(mt))
    w_noise = params.z_inf * coef * eta if params.z_inf != 0.0 else np.zeros(len(mt))

    if params.theta0 != 0.0 or params.z_inf != 0.0:
        order = np.argsort(mt.start_times, kind="stable")
        det, noise = impact_sweep(
            grid_t,
            mt.start_times[order],
            mt.durations[order],
            w_det[order],
            w_noise[order],
            omb[order],
            kmode,
        )
    else:
        det = np.zeros(grid_t.size)
        noise = np.zeros(grid_t.size)

    fund = fundamental_path(tape, params, grid_idx, stream(seed, "fundamental"))
    return PricePath(grid=grid_idx, times=grid_t, impact_mean=det, impact_noise=noise, fundamental=fund)
