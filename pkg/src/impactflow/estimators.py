"""Estimators for everything measured on tapes: generalized imbalances,
moment scaling, sign memory by volume bin, covariance/correlation surfaces,
aggregated impact, distribution collapse, and power-law fitting.

Windows are non-overlapping in trade time.  Imbalance-only statistics use
every window (floor(N/T) of them, via prefix sums); price-coupled
statistics use a `WindowPlan` that caps the number of windows per scale so
the price path only has to be evaluated on the plan's boundary grid.

All estimators accept either one tape or a sequence of tapes; with several
tapes the window samples are pooled across realizations before means and
fits are computed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit
from scipy.stats import linregress

from .errors import ConfigurationError, InsufficientDataError, NumericalError
from .flow import TradeTape
from .price import PricePath


def _as_tapes(tapes) -> list[TradeTape]:
    return [tapes] if isinstance(tapes, TradeTape) else list(tapes)


# ---------------------------------------------------------------------------
# imbalances
# ---------------------------------------------------------------------------


@dataclass
class ImbalanceSeries:
    """Per-window generalized imbalance I^a = sum of sign * q^a."""

    window_T: int
    a: float
    values: np.ndarray

    @property
    def n_windows(self) -> int:
        return self.values.size


def _signed_power_prefix(tape: TradeTape, a: float) -> np.ndarray:
    """Prefix sums c[k] = sum_{i<k} sign_i * q_i^a (length N+1)."""
    x = tape.signs.astype(np.float64)
    if a != 0.0:
        x = x * tape.volumes**a
    c = np.empty(tape.n_trades + 1)
    c[0] = 0.0
    np.cumsum(x, out=c[1:])
    return c


def generalized_imbalance(tape: TradeTape, T: int, a: float) -> ImbalanceSeries:
    """I^a over all floor(N/T) non-overlapping windows of T trades."""
    if tape.n_trades == 0:
        raise InsufficientDataError("empty tape")
    T = int(T)
    if not (1 <= T <= tape.n_trades):
        raise ConfigurationError("window size must be in [1, N]")
    if a < 0:
        raise ConfigurationError("a must be >= 0")
    c = _signed_power_prefix(tape, a)
    n_w = tape.n_trades // T
    b = np.arange(n_w + 1) * T
    return ImbalanceSeries(window_T=T, a=a, values=c[b[1:]] - c[b[:-1]])


# ---------------------------------------------------------------------------
# power-law fitting
# ---------------------------------------------------------------------------


@dataclass
class ExponentFit:
    """Power-law fit y = prefactor * x^exponent (+ offset in offset mode)."""

    exponent: float
    prefactor: float
    exponent_stderr: float
    r_squared: float
    fit_range: tuple[float, float]
    offset: float | None = None
    n_points: int = 0


def fit_power_law(x, y, with_offset: bool = False, fit_range=None) -> ExponentFit:
    """Fit a power law to (x, y).

    Pure mode is least squares on (log x, log y) and requires positive
    data; offset mode fits y = a0 + a1 * x^z by iterative least squares
    initialized from the pure fit with a0 = min(y)/2.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if fit_range is not None:
        lo, hi = fit_range
        keep = (x >= lo) & (x <= hi)
        x, y = x[keep], y[keep]
    keep = np.isfinite(x) & np.isfinite(y)
    x, y = x[keep], y[keep]
    rng_used = (float(x.min()), float(x.max())) if x.size else (math.nan, math.nan)
    if x.size < 4:
        raise InsufficientDataError(f"power-law fit needs >= 4 points, got {x.size}")

    if not with_offset:
        if np.any(x <= 0) or np.any(y <= 0):
            raise ConfigurationError("pure power-law fit requires positive x and y")
        res = linregress(np.log(x), np.log(y))
        return ExponentFit(
            exponent=float(res.slope),
            prefactor=float(np.exp(res.intercept)),
            exponent_stderr=float(res.stderr),
            r_squared=float(res.rvalue**2),
            fit_range=rng_used,
            n_points=x.size,
        )

    if np.any(x <= 0):
        raise ConfigurationError("offset fit requires positive x")
    pos = y > 0
    if pos.sum() >= 4:
        init = linregress(np.log(x[pos]), np.log(y[pos]))
        p0 = [float(np.min(y)) / 2.0, float(np.exp(init.intercept)), float(init.slope)]
    else:
        p0 = [float(np.min(y)) / 2.0, 1.0, 1.0]

    def model(xx, a0, a1, z):
        return a0 + a1 * xx**z

    try:
        popt, pcov = curve_fit(model, x, y, p0=p0, maxfev=20000)
    except RuntimeError as exc:
        raise NumericalError(f"offset power-law fit did not converge: {exc}") from exc
    resid = y - model(x, *popt)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid**2).sum()) / ss_tot if ss_tot > 0 else 1.0
    stderr = float(np.sqrt(pcov[2, 2])) if np.isfinite(pcov[2, 2]) else math.nan
    return ExponentFit(
        exponent=float(popt[2]),
        prefactor=float(popt[1]),
        exponent_stderr=stderr,
        r_squared=r2,
        fit_range=rng_used,
        offset=float(popt[0]),
        n_points=x.size,
    )


# ---------------------------------------------------------------------------
# moment scaling
# ---------------------------------------------------------------------------


def _batch_stderr(values: np.ndarray, batches: int = 16) -> float:
    """Standard error of the mean by batch means over consecutive chunks."""
    n = values.size
    b = max(2, min(batches, n))
    if n < 2:
        return math.nan
    cut = (n // b) * b
    means = values[:cut].reshape(b, -1).mean(axis=1)
    return float(means.std(ddof=1) / np.sqrt(b))


@dataclass
class MomentScaling:
    """Even moments of I^a versus window size, with per-order fits."""

    a: float
    orders: tuple[int, ...]
    T_grid: np.ndarray
    values: dict = field(default_factory=dict)   # order -> array over T
    stderr: dict = field(default_factory=dict)
    fits: dict = field(default_factory=dict)     # order -> ExponentFit


def moment_scaling(tapes, T_grid, a: float, orders=(1, 2, 3), fit_range=None, batches: int = 16) -> MomentScaling:
    """Sigma_a^(2n)(T) = mean over windows of (I^a_w)^(2n), with log-log fits."""
    tapes = _as_tapes(tapes)
    T_grid = np.asarray(sorted(int(t) for t in T_grid))
    n_min = min(t.n_trades for t in tapes)
    if T_grid.max() > n_min // 10:
        raise InsufficientDataError("max(T_grid) must leave >= 10 windows per tape")
    out = MomentScaling(a=a, orders=tuple(orders), T_grid=T_grid)
    prefixes = [_signed_power_prefix(t, a) for t in tapes]
    for n in orders:
        vals = np.empty(T_grid.size)
        errs = np.empty(T_grid.size)
        for i, T in enumerate(T_grid):
            samples = []
            for tape, c in zip(tapes, prefixes):
                n_w = tape.n_trades // T
                b = np.arange(n_w + 1) * T
                samples.append((c[b[1:]] - c[b[:-1]]) ** (2 * n))
            pooled = np.concatenate(samples)
            vals[i] = pooled.mean()
            errs[i] = _batch_stderr(pooled, batches)
        out.values[n] = vals
        out.stderr[n] = errs
        out.fits[n] = fit_power_law(T_grid, vals, fit_range=fit_range)
    return out


# ---------------------------------------------------------------------------
# window plan for price-coupled statistics
# ---------------------------------------------------------------------------


@dataclass
class WindowPlan:
    """Subsampled non-overlapping windows per scale plus their boundary grid.

    `grid` holds all boundary trade indices (sorted, unique); `windows[T]`
    is an (n_w, 2) array of positions into `grid` marking each window's
    (left, right) boundary.
    """

    n_trades: int
    grid: np.ndarray
    windows: dict

    def boundaries(self, T: int) -> tuple[np.ndarray, np.ndarray]:
        w = self.windows[int(T)]
        return self.grid[w[:, 0]], self.grid[w[:, 1]]


def window_plan(n_trades: int, T_grid, max_windows: int = 1024, n_blocks: int = 8) -> WindowPlan:
    """Choose up to `max_windows` non-overlapping windows per scale.

    When a scale offers more windows than the cap, windows are taken in
    `n_blocks` contiguous runs spread evenly across the tape (contiguous
    runs share boundaries, which keeps the price grid small).
    """
    bset: set[int] = set()
    raw: dict[int, list[tuple[int, int]]] = {}
    for T in sorted(int(t) for t in T_grid):
        usable = (n_trades - 1) // T
        if usable < 1:
            continue
        pairs: list[tuple[int, int]] = []
        if usable <= max_windows:
            for w in range(usable):
                pairs.append((w * T, (w + 1) * T))
        else:
            blocks = min(n_blocks, max_windows)
            per = max_windows // blocks
            stride = (usable - per) / max(blocks - 1, 1)
            used_upto = -1
            for b in range(blocks):
                w0 = int(round(b * stride))
                w0 = max(w0, used_upto + 1)
                if w0 + per > usable:
                    w0 = usable - per
                for w in range(w0, w0 + per):
                    pairs.append((w * T, (w + 1) * T))
                used_upto = w0 + per - 1
        raw[T] = pairs
        for lo, hi in pairs:
            bset.add(lo)
            bset.add(hi)
    grid = np.array(sorted(bset), dtype=np.int64)
    windows = {}
    for T, pairs in raw.items():
        arr = np.empty((len(pairs), 2), dtype=np.int64)
        flat = np.array(pairs, dtype=np.int64)
        arr[:, 0] = np.searchsorted(grid, flat[:, 0])
        arr[:, 1] = np.searchsorted(grid, flat[:, 1])
        windows[T] = arr
    return WindowPlan(n_trades=n_trades, grid=grid, windows=windows)


def _window_samples(tape: TradeTape, price: PricePath, plan: WindowPlan, T: int, a: float):
    """Per-window (delta_price, imbalance) samples for one tape."""
    w = plan.windows[int(T)]
    p = price.total
    delta = p[w[:, 1]] - p[w[:, 0]]
    c = _signed_power_prefix(tape, a)
    imb = c[plan.grid[w[:, 1]]] - c[plan.grid[w[:, 0]]]
    return delta, imb


# ---------------------------------------------------------------------------
# covariance / correlation surfaces
# ---------------------------------------------------------------------------


@dataclass
class ScalingSurface:
    """Statistic values on a (T, a) grid with standard errors."""

    statistic: str
    T_grid: np.ndarray
    a_grid: np.ndarray
    value: np.ndarray   # shape (len(T_grid), len(a_grid))
    stderr: np.ndarray
    fits: dict = field(default_factory=dict)  # a -> ExponentFit (over T)


def _check_plan(prices, plan: WindowPlan) -> None:
    for p in prices:
        if p.grid.size != plan.grid.size or not np.array_equal(p.grid, plan.grid):
            raise ConfigurationError("price path grid does not match the window plan")


def covariance_surface(tapes, prices, plan: WindowPlan, T_grid, a_grid, fit_range=None, batches: int = 16) -> ScalingSurface:
    """E[Delta_T * I^a_T] on the (T, a) grid, with per-a exponent fits."""
    tapes = _as_tapes(tapes)
    prices = [prices] if isinstance(prices, PricePath) else list(prices)
    _check_plan(prices, plan)
    T_grid = np.asarray(sorted(int(t) for t in T_grid))
    a_grid = np.asarray(list(a_grid), dtype=float)
    value = np.empty((T_grid.size, a_grid.size))
    stderr = np.empty_like(value)
    for i, T in enumerate(T_grid):
        deltas, imbs = [], []
        for tape, price in zip(tapes, prices):
            d, _ = _window_samples(tape, price, plan, T, 0.0)
            deltas.append(d)
        pooled_delta = np.concatenate(deltas)
        for j, a in enumerate(a_grid):
            chunks = []
            for tape, price in zip(tapes, prices):
                _, imb = _window_samples(tape, price, plan, T, a)
                chunks.append(imb)
            prod = pooled_delta * np.concatenate(chunks)
            value[i, j] = prod.mean()
            stderr[i, j] = _batch_stderr(prod, batches)
    fits = {}
    for j, a in enumerate(a_grid):
        y = value[:, j]
        if np.all(y > 0):
            fits[float(a)] = fit_power_law(T_grid, y, fit_range=fit_range)
        else:
            fits[float(a)] = None
    return ScalingSurface("covariance", T_grid, a_grid, value, stderr, fits)


def correlation_surface(tapes, prices, plan: WindowPlan, T_grid, a_grid) -> ScalingSurface:
    """Sample correlation R_a(T) between window price changes and I^a."""
    tapes = _as_tapes(tapes)
    prices = [prices] if isinstance(prices, PricePath) else list(prices)
    _check_plan(prices, plan)
    T_grid = np.asarray(sorted(int(t) for t in T_grid))
    a_grid = np.asarray(list(a_grid), dtype=float)
    value = np.full((T_grid.size, a_grid.size), np.nan)
    stderr = np.full_like(value, np.nan)
    for i, T in enumerate(T_grid):
        deltas = []
        for tape, price in zip(tapes, prices):
            d, _ = _window_samples(tape, price, plan, T, 0.0)
            deltas.append(d)
        delta = np.concatenate(deltas)
        sd = delta.std()
        for j, a in enumerate(a_grid):
            imb = np.concatenate([_window_samples(t, p, plan, T, a)[1] for t, p in zip(tapes, prices)])
            si = imb.std()
            if sd == 0.0 or si == 0.0:
                continue
            r = float(np.mean((delta - delta.mean()) * (imb - imb.mean())) / (sd * si))
            value[i, j] = r
            stderr[i, j] = (1.0 - r * r) / math.sqrt(delta.size)
    return ScalingSurface("correlation", T_grid, a_grid, value, stderr)


def price_moment_scaling(prices, plan: WindowPlan, T_grid, orders=(1, 2, 3), fit_range=None, batches: int = 16):
    """E[Delta_T^(2n)] versus T with zeta_n fits (pure power-law mode)."""
    prices = [prices] if isinstance(prices, PricePath) else list(prices)
    _check_plan(prices, plan)
    T_grid = np.asarray(sorted(int(t) for t in T_grid))
    values = {n: np.empty(T_grid.size) for n in orders}
    stderrs = {n: np.empty(T_grid.size) for n in orders}
    for i, T in enumerate(T_grid):
        w = plan.windows[int(T)]
        pooled = np.concatenate([p.total[w[:, 1]] - p.total[w[:, 0]] for p in prices])
        for n in orders:
            x = pooled ** (2 * n)
            values[n][i] = x.mean()
            stderrs[n][i] = _batch_stderr(x, batches)
    fits = {n: fit_power_law(T_grid, values[n], fit_range=fit_range) for n in orders}
    return values, stderrs, fits


# ---------------------------------------------------------------------------
# sign autocorrelation by volume bin
# ---------------------------------------------------------------------------


@dataclass
class BinnedSignMemory:
    """Per-volume-bin sign autocorrelation curves and fitted decay exponents."""

    bin_edges: np.ndarray        # in units of q / daily volume
    bin_centers: np.ndarray
    counts: np.ndarray
    lags: np.ndarray
    corr: np.ndarray             # shape (n_bins, n_lags)
    gammas: np.ndarray           # fitted decay exponent per bin (nan if unreliable)
    gamma_stderr: np.ndarray
    reliable: np.ndarray         # bool per bin
    largest_flagged: int         # index of the largest bin (paper drops it)


def sign_autocorrelation_by_volume_bin(
    tapes,
    n_bins: int = 5,
    day_block: int = 10_000,
    lags=None,
    min_trades: int = 10_000,
    fit_lag_range=(2, 200),
) -> BinnedSignMemory:
    """Sign autocorrelation restricted to trades in logarithmic volume bins.

    Volumes are rescaled by the mean daily volume (day = `day_block`
    trades); lags are measured within each bin-restricted subsequence.
    Bins with fewer than `min_trades` pooled trades are flagged unreliable
    and not fitted.
    """
    tapes = _as_tapes(tapes)
    if n_bins < 2:
        raise ConfigurationError("need at least 2 bins")
    if lags is None:
        lags = np.unique(np.round(np.logspace(0, np.log10(500), 25)).astype(int))
    lags = np.asarray(lags, dtype=int)

    qts = []
    for t in tapes:
        n_days = max(1, t.n_trades // day_block)
        phi_d = t.volumes.sum() / n_days
        qts.append(t.volumes / phi_d)
    pooled_qt = np.concatenate(qts)
    lo, hi = pooled_qt.min(), pooled_qt.max()
    edges = np.geomspace(lo, hi * (1 + 1e-12), n_bins + 1)
    centers = np.sqrt(edges[:-1] * edges[1:])

    counts = np.zeros(n_bins, dtype=np.int64)
    num = np.zeros((n_bins, lags.size))
    den = np.zeros((n_bins, lags.size))
    for t, qt in zip(tapes, qts):
        which = np.clip(np.searchsorted(edges, qt, side="right") - 1, 0, n_bins - 1)
        for b in range(n_bins):
            s = t.signs[which == b].astype(np.float64)
            counts[b] += s.size
            for il, k in enumerate(lags):
                if s.size > k + 1:
                    num[b, il] += float(np.dot(s[:-k], s[k:]))
                    den[b, il] += s.size - k
    corr = np.where(den > 0, num / np.maximum(den, 1), np.nan)

    gammas = np.full(n_bins, np.nan)
    gerr = np.full(n_bins, np.nan)
    reliable = counts >= min_trades
    for b in range(n_bins):
        if not reliable[b]:
            continue
        se = 1.0 / np.sqrt(np.maximum(den[b], 1.0))
        keep = (
            (lags >= fit_lag_range[0])
            & (lags <= fit_lag_range[1])
            & (corr[b] > 2.0 * se)
        )
        if keep.sum() < 4:
            reliable[b] = False
            continue
        fit = fit_power_law(lags[keep], corr[b][keep])
        gammas[b] = -fit.exponent
        gerr[b] = fit.exponent_stderr
    return BinnedSignMemory(
        bin_edges=edges,
        bin_centers=centers,
        counts=counts,
        lags=lags,
        corr=corr,
        gammas=gammas,
        gamma_stderr=gerr,
        reliable=reliable,
        largest_flagged=n_bins - 1,
    )


# ---------------------------------------------------------------------------
# aggregated impact and distribution collapse
# ---------------------------------------------------------------------------


@dataclass
class AggregatedImpact:
    """Binned E[Delta | I^a] curve at one window size."""

    T: int
    a: float
    imbalance_mean: np.ndarray
    delta_mean: np.ndarray
    counts: np.ndarray


def aggregated_impact_curve(tapes, prices, plan: WindowPlan, T: int, a: float, n_bins: int = 21) -> AggregatedImpact:
    """Mean window price change conditioned on quantile bins of I^a."""
    tapes = _as_tapes(tapes)
    prices = [prices] if isinstance(prices, PricePath) else list(prices)
    _check_plan(prices, plan)
    ds, imbs = [], []
    for tape, price in zip(tapes, prices):
        d, imb = _window_samples(tape, price, plan, T, a)
        ds.append(d)
        imbs.append(imb)
    delta = np.concatenate(ds)
    imb = np.concatenate(imbs)
    qs = np.quantile(imb, np.linspace(0, 1, n_bins + 1))
    qs[-1] += 1e-9
    which = np.clip(np.searchsorted(qs, imb, side="right") - 1, 0, n_bins - 1)
    im = np.full(n_bins, np.nan)
    dm = np.full(n_bins, np.nan)
    cnt = np.bincount(which, minlength=n_bins)
    for b in range(n_bins):
        sel = which == b
        if sel.any():
            im[b] = imb[sel].mean()
            dm[b] = delta[sel].mean()
    return AggregatedImpact(T=int(T), a=a, imbalance_mean=im, delta_mean=dm, counts=cnt)


@dataclass
class CollapseResult:
    """Kolmogorov-Smirnov distances of rescaled imbalance distributions."""

    chi_grid: np.ndarray
    ks_curve: np.ndarray
    best_chi: float
    best_ks: float


def _max_pairwise_ks(samples: list[np.ndarray]) -> float:
    grids = np.sort(np.concatenate(samples))
    if grids.size > 4096:
        grids = grids[:: max(1, grids.size // 4096)]
    cdfs = [np.searchsorted(np.sort(s), grids, side="right") / s.size for s in samples]
    worst = 0.0
    for i in range(len(cdfs)):
        for j in range(i + 1, len(cdfs)):
            worst = max(worst, float(np.abs(cdfs[i] - cdfs[j]).max()))
    return worst


def distribution_collapse(series_by_T: dict, chi_grid=None) -> CollapseResult:
    """Scan chi for the best collapse of I^a(T) * T^-chi across window sizes.

    Returns the max pairwise KS distance at each chi and the minimizing chi.
    """
    if len(series_by_T) < 2:
        raise ConfigurationError("collapse needs at least two window sizes")
    if chi_grid is None:
        chi_grid = np.linspace(0.3, 1.0, 71)
    chi_grid = np.asarray(chi_grid, dtype=float)
    ks = np.empty(chi_grid.size)
    items = sorted(series_by_T.items())
    for i, chi in enumerate(chi_grid):
        ks[i] = _max_pairwise_ks([np.asarray(v) / float(T) ** chi for T, v in items])
    best = int(np.argmin(ks))
    return CollapseResult(chi_grid=chi_grid, ks_curve=ks, best_chi=float(chi_grid[best]), best_ks=float(ks[best]))


def clip_volumes(tape: TradeTape, fraction: float = 0.01, day_block: int = 10_000) -> TradeTape:
    """Cap trade volumes at `fraction` of the local daily volume.

    Days are consecutive blocks of `day_block` trades; the metaorder
    registry is left untouched (this is an analysis-side transformation).
    """
    if not (0.0 < fraction <= 1.0):
        raise ConfigurationError("fraction must be in (0, 1]")
    day = np.arange(tape.n_trades) // int(day_block)
    totals = np.bincount(day, weights=tape.volumes)
    cap = fraction * totals[day]
    return tape.copy_with(volumes=np.minimum(tape.volumes, cap))
