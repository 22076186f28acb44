"""Metaorder population and trade-tape simulation.

Metaorders are initiated by a Poisson process of rate `nu`; each draws a
child volume q, a duration s from the q-conditional Pareto law, and a sign
from a pre-generated correlated sign sequence (consumed in initiation
order).  While active, a metaorder emits child trades as a Poisson process
of rate `phi_child`.  The simulation starts from the exact stationary
state: the number of initially active metaorders is Poisson(nu * sbar),
each with a size-biased duration and a uniform age.

Trades are generated per metaorder through the order-statistics property
of the Poisson process (counts first, then uniform times), merged into
global time order with metaorder-id tie-breaks, and the tape is cut at the
requested number of trades.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, InsufficientDataError
from .kernels import generate_correlated_signs, sample_child_volume, sample_duration, sample_sizebiased_duration
from .params import ModelParams, stream


@dataclass
class Metaorder:
    """One metaorder record from the registry."""

    id: int
    start_time: float
    sign: int
    child_volume: float
    duration: float
    participation: float

    @property
    def total_volume(self) -> float:
        return self.child_volume * self.participation * self.duration


@dataclass
class MetaorderTable:
    """Columnar registry of all metaorders known to a tape."""

    start_times: np.ndarray
    durations: np.ndarray
    signs: np.ndarray
    child_volumes: np.ndarray
    participation: np.ndarray

    def __len__(self) -> int:
        return self.start_times.size

    def record(self, i: int) -> Metaorder:
        return Metaorder(
            id=i,
            start_time=float(self.start_times[i]),
            sign=int(self.signs[i]),
            child_volume=float(self.child_volumes[i]),
            duration=float(self.durations[i]),
            participation=float(self.participation[i]),
        )

    @property
    def end_times(self) -> np.ndarray:
        return self.start_times + self.durations


@dataclass
class TradeTape:
    """Ordered child-order events plus the generating metaorder registry.

    `meta_ids` is -1 for analysis-only tapes ingested without metaorder
    attribution.  Immutable by convention after construction.
    """

    times: np.ndarray
    meta_ids: np.ndarray
    signs: np.ndarray
    volumes: np.ndarray
    metaorders: MetaorderTable | None = None
    params: ModelParams | None = None
    sign_diag: dict = field(default_factory=dict)

    @property
    def n_trades(self) -> int:
        return self.times.size

    @property
    def span(self) -> float:
        return float(self.times[-1]) if self.n_trades else 0.0

    def copy_with(self, **kw) -> "TradeTape":
        base = dict(
            times=self.times,
            meta_ids=self.meta_ids,
            signs=self.signs,
            volumes=self.volumes,
            metaorders=self.metaorders,
            params=self.params,
            sign_diag=self.sign_diag,
        )
        base.update(kw)
        return TradeTape(**base)


def initialize_stationary_state(params: ModelParams, rng: np.random.Generator):
    """Draw the metaorder population active at t = 0.

    Exact stationary renewal initialization: count ~ Poisson(nu * sbar);
    each pre-existing metaorder gets q ~ Xi, a size-biased duration s and a
    uniform age in [0, s], i.e. it started at -age and will survive another
    s - age.

    Returns (start_times, durations, child_volumes); start_times <= 0.
    """
    if params.nu == 0.0:
        z = np.zeros(0)
        return z, z.copy(), z.copy()
    sbar = params.sbar
    if not np.isfinite(sbar):
        raise ConfigurationError("mean duration diverges; stationary state undefined")
    n = rng.poisson(params.nu * sbar)
    q = np.atleast_1d(sample_child_volume(params, rng, size=n))
    s = np.atleast_1d(sample_sizebiased_duration(params, q, rng))
    age = rng.random(n) * s
    order = np.argsort(-age, kind="stable")  # initiation order: oldest first
    return -age[order], s[order], q[order]


def simulate_tape(params: ModelParams, horizon_trades: int, rng: np.random.Generator | None = None) -> TradeTape:
    """Simulate a trade tape of exactly `horizon_trades` trades.

    The initiation horizon is extended in blocks until the covered wall-time
    window contains at least the requested number of trades; the sign
    sequence is regenerated for the final metaorder count so the output is a
    pure function of (params, horizon_trades, rng state).
    """
    n_target = int(horizon_trades)
    if n_target < 1:
        raise ConfigurationError("horizon_trades must be >= 1")
    rate = params.nu * params.phi_child * params.sbar
    if not rate > 0.0:
        raise ConfigurationError("expected trade rate nu*phi*sbar is zero; tape would never fill")
    if rng is None:
        rng = stream(params.seed, "tape")
    sign_seed = int(rng.integers(2**62))  # ties the sign sequence to this tape's stream

    init_starts, init_durs, init_qs = initialize_stationary_state(params, rng)

    t_cover = n_target / rate * 1.08 + 20.0 * params.sbar
    # children later than this can never be among the first n_target trades
    t_hard = n_target / rate * 4.0 + 200.0 * params.sbar

    starts_new: list[np.ndarray] = []
    t_done = 0.0
    for _round in range(64):
        # initiations in (t_done, t_cover]
        block = t_cover - t_done
        n_new = rng.poisson(params.nu * block)
        st = np.sort(rng.random(n_new)) * block + t_done
        starts_new.append(st)
        t_done = t_cover

        starts = np.concatenate([init_starts, *starts_new])
        n_all = starts.size
        qs_new = np.atleast_1d(sample_child_volume(params, rng, size=sum(s.size for s in starts_new)))
        durs_new = np.atleast_1d(sample_duration(params, qs_new, rng)) if qs_new.size else qs_new
        qs = np.concatenate([init_qs, qs_new])
        durs = np.concatenate([init_durs, durs_new])

        # children of each metaorder on [max(start,0), min(end, t_hard)]
        w_lo = np.maximum(starts, 0.0)
        w_hi = np.minimum(starts + durs, t_hard)
        w_len = np.maximum(w_hi - w_lo, 0.0)
        counts = rng.poisson(params.phi_child * w_len)
        total = int(counts.sum())
        owner = np.repeat(np.arange(n_all), counts)
        t_child = w_lo[owner] + rng.random(total) * w_len[owner]

        in_cover = t_child <= t_cover
        if int(in_cover.sum()) >= n_target:
            break
        t_cover = min(t_cover * 1.3 + 10.0 * params.sbar, t_hard)
        if t_cover >= t_hard:
            # last chance with the hard horizon
            t_cover = t_hard
    else:
        raise InsufficientDataError("could not generate enough trades within the hard horizon")

    order = np.lexsort((owner[in_cover], t_child[in_cover]))
    times = t_child[in_cover][order][:n_target].copy()
    owners = owner[in_cover][order][:n_target].copy()
    if times.size < n_target:
        raise InsufficientDataError("tape fill failed; raise horizon or rates")

    seq = generate_correlated_signs(n_all, params, stream(sign_seed, "signs", n_all))
    meta_signs = seq.signs

    table = MetaorderTable(
        start_times=starts,
        durations=durs,
        signs=meta_signs.astype(np.int8),
        child_volumes=qs,
        participation=np.full(n_all, params.phi_child),
    )
    return TradeTape(
        times=times,
        meta_ids=owners.astype(np.int64),
        signs=meta_signs[owners].astype(np.int8),
        volumes=qs[owners],
        metaorders=table,
        params=params,
        sign_diag={
            "realized_amplitude": seq.realized_amplitude,
            "clipped_spectral_mass": seq.clipped_spectral_mass,
            "target_amplitude": seq.target_amplitude,
        },
    )


@dataclass
class FlowStats:
    """Realized flow quantities with simple standard errors."""

    realized_nu: float
    realized_nu_stderr: float
    realized_phi: float
    sbar: float
    sbar_stderr: float
    nbar: float
    nbar_stderr: float
    q_mean: float
    q_logvar: float
    volume_rate: float
    trade_rate: float
    active_grid: np.ndarray
    active_counts: np.ndarray

    @property
    def active_mean(self) -> float:
        return float(self.active_counts.mean())


def flow_statistics(tape: TradeTape, n_active_samples: int = 200) -> FlowStats:
    """Realized flow statistics of a simulated tape.

    Uses only metaorders initiated at t >= 0 for duration statistics (the
    initial population is size-biased by construction).  The active-count
    trajectory is sampled on a uniform wall-time grid.
    """
    if tape.n_trades == 0:
        raise InsufficientDataError("empty tape")
    if tape.metaorders is None:
        raise InsufficientDataError("flow statistics need the metaorder registry")
    mt = tape.metaorders
    span = tape.span
    fresh = mt.start_times >= 0.0
    inside = fresh & (mt.start_times <= span)
    n_fresh = int(inside.sum())

    durs = mt.durations[inside]
    sbar = float(durs.mean()) if n_fresh else float("nan")
    sbar_se = float(durs.std(ddof=1) / np.sqrt(n_fresh)) if n_fresh > 1 else float("nan")

    counts = np.bincount(tape.meta_ids, minlength=len(mt)).astype(float)
    completed = inside & (mt.end_times <= span)
    nbar = float(counts[completed].mean()) if completed.any() else float("nan")
    nbar_se = (
        float(counts[completed].std(ddof=1) / np.sqrt(completed.sum())) if completed.sum() > 1 else float("nan")
    )
    phi_hat = float(counts[completed].sum() / mt.durations[completed].sum()) if completed.any() else float("nan")

    grid = np.linspace(0.0, span, n_active_samples)
    started = np.sort(mt.start_times)
    ended = np.sort(mt.end_times)
    active_counts = (
        np.searchsorted(started, grid, side="right") - np.searchsorted(ended, grid, side="right")
    ).astype(float)

    logq = np.log(tape.volumes)
    return FlowStats(
        realized_nu=n_fresh / span,
        realized_nu_stderr=np.sqrt(n_fresh) / span,
        realized_phi=phi_hat,
        sbar=sbar,
        sbar_stderr=sbar_se,
        nbar=nbar,
        nbar_stderr=nbar_se,
        q_mean=float(tape.volumes.mean()),
        q_logvar=float(logq.var()),
        volume_rate=float(tape.volumes.sum() / span),
        trade_rate=tape.n_trades / span,
        active_grid=grid,
        active_counts=active_counts,
    )
