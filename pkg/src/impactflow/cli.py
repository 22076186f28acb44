"""Command-line driver: simulate -> analyze -> predict -> report, plus selftest.

Exit codes: 0 success, 1 configuration error, 2 I/O error, 3 numerical
failure, 4 acceptance failure (report only).  Every artifact written
carries the config hash and seed for reproducibility.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, default_config, read_config, write_config
from .errors import ConfigurationError, ImpactflowError, TapeFormatError
from .estimators import (
    aggregated_impact_curve,
    clip_volumes,
    correlation_surface,
    covariance_surface,
    distribution_collapse,
    generalized_imbalance,
    moment_scaling,
    price_moment_scaling,
    sign_autocorrelation_by_volume_bin,
    window_plan,
)
from .flow import TradeTape, flow_statistics, simulate_tape
from .oracle import (
    impact_constants,
    predict_covariance_exponent,
    predict_price_variance_exponent,
    predict_sigma_a_exponent,
)
from .params import stream
from .price import assemble_price_path
from .tapeio import (
    atomic_write_text,
    read_metaorders_csv,
    read_price_csv,
    read_tape_csv,
    write_metaorders_csv,
    write_price_csv,
    write_tape_csv,
)


def _configure_threads() -> None:
    jobs = os.environ.get("IMPACTFLOW_JOBS")
    if jobs:
        try:
            import numba

            numba.set_num_threads(max(1, int(jobs)))
        except (ImportError, ValueError):
            pass


def _realization_params(cfg: RunConfig, r: int):
    return cfg.params.with_updates(seed=int(stream(cfg.params.seed, "realization", r).integers(2**62)))


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg = read_config(args.config)
    if args.seed is not None:
        cfg.params = cfg.params.with_updates(seed=args.seed)
    out = Path(args.out)
    single = cfg.n_realizations == 1 and out.suffix == ".csv"
    tapes = []
    for r in range(cfg.n_realizations):
        p = _realization_params(cfg, r)
        tape = simulate_tape(p, cfg.horizon_trades)
        path = out if single else Path(out) / f"tape_{r:03d}.csv"
        write_tape_csv(tape, path)
        write_metaorders_csv(tape.metaorders, path.with_suffix(".meta.csv"))
        tapes.append(str(path))
    meta = {
        "config_hash": cfg.content_hash(),
        "seed": cfg.params.seed,
        "version": __version__,
        "n_realizations": cfg.n_realizations,
        "horizon_trades": cfg.horizon_trades,
        "tapes": tapes,
    }
    meta_path = (out.with_suffix(".run.json")) if single else Path(out) / "run.json"
    atomic_write_text(meta_path, json.dumps(meta, indent=2, sort_keys=True) + "\n")
    print(f"wrote {len(tapes)} tape(s); config hash {meta['config_hash']}")
    return 0


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------


def _load_tapes(tape_arg: str, cfg: RunConfig):
    path = Path(tape_arg)
    if path.is_dir():
        files = sorted(f for f in path.glob("tape_*.csv") if not f.name.endswith(".meta.csv"))
    else:
        files = [path]
    if not files:
        raise TapeFormatError(f"no tapes found under {path}")
    tapes = []
    prices_external = []
    for f in files:
        tape, price_col = read_tape_csv(f)
        meta_file = f.with_suffix(".meta.csv")
        if meta_file.exists():
            tape = tape.copy_with(metaorders=read_metaorders_csv(meta_file), params=cfg.params)
        tapes.append(tape)
        prices_external.append(price_col)
    return tapes, prices_external


def _surface_rows(stat: str, T_grid, a, values, stderr):
    rows = []
    for T, v, e in zip(T_grid, values, stderr):
        rows.append(f"{stat},{T},{a:g},{v:.10g},{e:.10g}")
    return rows


def cmd_analyze(args) -> int:
    cfg = read_config(args.config)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    tapes, ext_price_cols = _load_tapes(args.tape, cfg)
    n_min = min(t.n_trades for t in tapes)
    T_grid = [T for T in cfg.T_grid if T <= n_min // 10]
    if len(T_grid) < 4:
        raise ConfigurationError("tape too short for the configured T grid")
    plan = window_plan(n_min, T_grid, max_windows=cfg.max_windows)

    clipped = [clip_volumes(t, cfg.clip_fraction, cfg.day_block) for t in tapes]

    # price paths: external price column > price csv > assembled from model
    prices = []
    have_price = True
    for i, tape in enumerate(tapes):
        if ext_price_cols[i] is not None:
            p = ext_price_cols[i]
            prices.append(_external_price_path(tape, p, plan))
        elif args.price:
            idx, pr = read_price_csv(args.price)
            full = np.full(tape.n_trades, np.nan)
            full[idx] = pr
            prices.append(_external_price_path(tape, full, plan))
        elif tape.metaorders is not None and tape.params is not None:
            prices.append(assemble_price_path(tape, plan.grid, params=tape.params))
        else:
            have_price = False
    fit_range = tuple(cfg.fit_range)

    surf_rows = []
    fit_rows = ["statistic,a,n,exponent,stderr,prefactor,offset,r_squared,fit_lo,fit_hi"]
    for a in cfg.a_grid:
        ms = moment_scaling(clipped, T_grid, a=a, orders=(1, 2, 3), fit_range=fit_range)
        for n in (1, 2, 3):
            surf_rows += _surface_rows(f"moment_{2*n}", ms.T_grid, a, ms.values[n], ms.stderr[n])
            f = ms.fits[n]
            fit_rows.append(
                f"moment_{2*n},{a:g},{n},{f.exponent:.8g},{f.exponent_stderr:.4g},"
                f"{f.prefactor:.8g},,{f.r_squared:.6g},{f.fit_range[0]:g},{f.fit_range[1]:g}"
            )

    if have_price and prices:
        cov = covariance_surface(clipped, prices, plan, T_grid, cfg.a_grid, fit_range=fit_range)
        corr = correlation_surface(clipped, prices, plan, T_grid, cfg.a_grid)
        for j, a in enumerate(cov.a_grid):
            surf_rows += _surface_rows("covariance", cov.T_grid, a, cov.value[:, j], cov.stderr[:, j])
            surf_rows += _surface_rows("correlation", corr.T_grid, a, corr.value[:, j], corr.stderr[:, j])
            f = cov.fits[float(a)]
            if f is not None:
                fit_rows.append(
                    f"covariance,{a:g},,{f.exponent:.8g},{f.exponent_stderr:.4g},"
                    f"{f.prefactor:.8g},,{f.r_squared:.6g},{f.fit_range[0]:g},{f.fit_range[1]:g}"
                )
        pv, pe, pf = price_moment_scaling(prices, plan, T_grid, orders=(1, 2, 3), fit_range=fit_range)
        for n in (1, 2, 3):
            surf_rows += _surface_rows(f"price_moment_{2*n}", sorted(T_grid), 0.0, pv[n], pe[n])
            f = pf[n]
            fit_rows.append(
                f"price_moment_{2*n},0,{n},{f.exponent:.8g},{f.exponent_stderr:.4g},"
                f"{f.prefactor:.8g},,{f.r_squared:.6g},{f.fit_range[0]:g},{f.fit_range[1]:g}"
            )
        agg_ts = [t for t in T_grid if 91 <= t <= 1024][:: max(1, len([t for t in T_grid if 91 <= t <= 1024]) // 4)]
        arow = ["T,a,bin,imbalance_mean,delta_mean,count"]
        for t_ref in agg_ts:
            agg = aggregated_impact_curve(clipped, prices, plan, t_ref, a=0.0, n_bins=21)
            for b in range(agg.imbalance_mean.size):
                arow.append(f"{agg.T},0,{b},{agg.imbalance_mean[b]:.8g},{agg.delta_mean[b]:.8g},{agg.counts[b]}")
        atomic_write_text(outdir / "aggregated_impact.csv", "\n".join(arow) + "\n")

    # sign memory by volume bin
    bm = sign_autocorrelation_by_volume_bin(clipped, n_bins=cfg.n_autocorr_bins, day_block=cfg.day_block)
    rows = ["bin,q_lo,q_hi,q_center,n_trades,reliable,flagged_largest,gamma,gamma_stderr"]
    for b in range(bm.bin_centers.size):
        rows.append(
            f"{b},{bm.bin_edges[b]:.8g},{bm.bin_edges[b+1]:.8g},{bm.bin_centers[b]:.8g},"
            f"{bm.counts[b]},{int(bm.reliable[b])},{int(b == bm.largest_flagged)},"
            f"{bm.gammas[b]:.8g},{bm.gamma_stderr[b]:.6g}"
        )
    atomic_write_text(outdir / "autocorr_bins.csv", "\n".join(rows) + "\n")
    rows = ["bin,lag,corr"]
    for b in range(bm.bin_centers.size):
        for k, c in zip(bm.lags, bm.corr[b]):
            rows.append(f"{b},{k},{c:.8g}")
    atomic_write_text(outdir / "autocorr_curves.csv", "\n".join(rows) + "\n")

    # sign-imbalance distribution collapse
    collapse_Ts = [T for T in T_grid if T >= 64][:: max(1, len(T_grid) // 6)] or T_grid[-2:]
    series = {T: generalized_imbalance_pooled(clipped, T, 0.0) for T in collapse_Ts}
    col = distribution_collapse(series)
    rows = ["chi,max_ks"] + [f"{c:.6g},{k:.8g}" for c, k in zip(col.chi_grid, col.ks_curve)]
    atomic_write_text(outdir / "collapse_scan.csv", "\n".join(rows) + "\n")
    rows = ["T,chi,bin_center,density"]
    for T in collapse_Ts:
        v = series[T] / float(T) ** col.best_chi
        hist, edges = np.histogram(v, bins=61, density=True)
        centers = 0.5 * (edges[1:] + edges[:-1])
        for c, h in zip(centers, hist):
            rows.append(f"{T},{col.best_chi:.6g},{c:.8g},{h:.8g}")
    atomic_write_text(outdir / "imbalance_hist.csv", "\n".join(rows) + "\n")

    # flow statistics (first tape with a registry)
    for tape in tapes:
        if tape.metaorders is not None:
            fs = flow_statistics(tape)
            doc = {
                "realized_nu": fs.realized_nu,
                "realized_phi": fs.realized_phi,
                "sbar": fs.sbar,
                "nbar": fs.nbar,
                "q_mean": fs.q_mean,
                "trade_rate": fs.trade_rate,
                "volume_rate": fs.volume_rate,
                "active_mean": fs.active_mean,
            }
            atomic_write_text(outdir / "flow_stats.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")
            break

    header = "statistic,T,a,value,stderr"
    atomic_write_text(outdir / "surfaces.csv", "\n".join([header, *surf_rows]) + "\n")
    atomic_write_text(outdir / "exponents.csv", "\n".join(fit_rows) + "\n")
    atomic_write_text(
        outdir / "analysis.json",
        json.dumps(
            {
                "config_hash": cfg.content_hash(),
                "seed": cfg.params.seed,
                "version": __version__,
                "n_tapes": len(tapes),
                "T_grid": list(map(int, T_grid)),
                "collapse_best_chi": col.best_chi,
                "collapse_best_ks": col.best_ks,
                "generative_sigma_logq": cfg.params.sigma_logq,
                "sign_diag": tapes[0].sign_diag,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
    )
    print(f"analysis written to {outdir}")
    return 0


def generalized_imbalance_pooled(tapes, T, a):
    if isinstance(tapes, TradeTape):
        tapes = [tapes]
    return np.concatenate([generalized_imbalance(t, T, a).values for t in tapes])


def _external_price_path(tape, price_per_trade, plan):
    from .price import PricePath

    p = np.asarray(price_per_trade, dtype=float)[plan.grid]
    if np.any(~np.isfinite(p)):
        raise TapeFormatError("external price series does not cover the window grid")
    zero = np.zeros_like(p)
    return PricePath(grid=plan.grid, times=tape.times[plan.grid], impact_mean=p, impact_noise=zero, fundamental=zero)


# ---------------------------------------------------------------------------
# predict
# ---------------------------------------------------------------------------


def cmd_predict(args) -> int:
    cfg = read_config(args.config)
    p = cfg.params
    rows = ["statistic,a,n,value"]
    for a in cfg.a_grid:
        for n in (1, 2, 3):
            sp = predict_sigma_a_exponent(p, a, n)
            rows.append(f"sigma{2*n}_exponent,{a:g},{n},{sp.diagonal:.8g}")
        cp = predict_covariance_exponent(p, a)
        rows.append(f"covariance_exponent_diagonal,{a:g},,{cp.diagonal:.8g}")
        rows.append(f"covariance_exponent_offdiag,{a:g},,{cp.off_diagonal:.8g}")
        rows.append(f"covariance_exponent_informed,{a:g},,{cp.informed:.8g}")
    pv = predict_price_variance_exponent(p)
    rows.append(f"price_variance_exponent_diagonal,,,{pv.diagonal:.8g}")
    rows.append(f"price_variance_exponent_offdiag,,,{pv.off_diagonal:.8g}")
    for n, z in pv.zeta.items():
        rows.append(f"price_zeta,,{n},{z:.8g}")
    cst = impact_constants(p)
    rows.append(f"bracket_B,,,{cst.bracket_B:.8g}")
    rows.append(f"C_offdiag,,,{cst.C_offdiag:.8g}")
    rows.append(f"sbar,,,{cst.sbar:.8g}")
    rows.append(f"nbar,,,{cst.nbar:.8g}")
    rows.append(f"tau0,,,{cst.tau0:.8g}")
    rows.append(f"volume_flow,,,{cst.volume_flow:.8g}")
    for n, ac in cst.a_c.items():
        rows.append(f"a_c,,{n},{ac:.8g}")
    rows.append(f"a_c_prime,,,{cst.a_c_prime:.8g}")
    atomic_write_text(args.out, "\n".join(rows) + "\n")

    # reference impact trajectories for the decay-comparison figure
    mo_qs = math.exp(p.m_logq)
    from .flow import Metaorder

    ref = Metaorder(id=0, start_time=0.0, sign=1, child_volume=mo_qs, duration=10.0, participation=p.phi_child)
    ts = np.geomspace(0.01, 1000.0, 200)
    from .price import impact_trajectory_value

    cols = {}
    for mode in ("standard", "two_time", "permanent"):
        try:
            cols[mode] = impact_trajectory_value(ref, ts, p, mode=mode)
        except ImpactflowError:
            cols[mode] = np.full_like(ts, np.nan)
    rows = ["t,standard,two_time,permanent"]
    for i, t in enumerate(ts):
        rows.append(f"{t:.8g},{cols['standard'][i]:.8g},{cols['two_time'][i]:.8g},{cols['permanent'][i]:.8g}")
    atomic_write_text(Path(args.out).with_suffix(".trajectories.csv"), "\n".join(rows) + "\n")
    print(f"predictions written to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

_REPORT_TOLERANCES = {
    "moment_2": 0.2,
    "moment_4": 0.3,
    "moment_6": 0.4,
    "covariance": 0.25,
    "price_moment_2": 0.15,
}

_PRED_KEY = {
    "moment_2": "sigma2_exponent",
    "moment_4": "sigma4_exponent",
    "moment_6": "sigma6_exponent",
    "covariance": "covariance_exponent_diagonal",
    "price_moment_2": "price_variance_exponent_diagonal",
}


def cmd_report(args) -> int:
    measured_path = Path(args.measured) / "exponents.csv"
    if not measured_path.exists():
        raise TapeFormatError(f"missing {measured_path}")
    measured = {}
    for ln in measured_path.read_text().splitlines()[1:]:
        parts = ln.split(",")
        stat, a = parts[0], parts[1]
        measured[(stat, a)] = {
            "exponent": float(parts[3]),
            "stderr": float(parts[4]) if parts[4] else math.nan,
        }
    preds = {}
    for ln in Path(args.pred).read_text().splitlines()[1:]:
        stat, a, n, value = ln.split(",")
        preds[(stat, a)] = float(value)

    entries = []
    n_fail = 0
    for (stat, a), m in sorted(measured.items()):
        pk = _PRED_KEY.get(stat)
        pred = preds.get((pk, a)) if pk else None
        if stat == "price_moment_2" and pred is not None:
            od = preds.get(("price_variance_exponent_offdiag", ""))
            if od is not None:
                pred = max(pred, od)
        if pred is None:
            entries.append({"statistic": stat, "a": a, "measured": m["exponent"], "prediction": None, "status": "no prediction"})
            continue
        tol = _REPORT_TOLERANCES.get(stat, 0.25)
        ok = abs(m["exponent"] - pred) <= tol
        n_fail += 0 if ok else 1
        entries.append(
            {
                "statistic": stat,
                "a": a,
                "measured": m["exponent"],
                "stderr": m["stderr"],
                "prediction": pred,
                "tolerance": tol,
                "status": "pass" if ok else "fail",
            }
        )
    analysis_meta = {}
    meta_path = Path(args.measured) / "analysis.json"
    if meta_path.exists():
        analysis_meta = json.loads(meta_path.read_text())
    bundle = {
        "version": __version__,
        "provenance": analysis_meta,
        "entries": entries,
        "n_fail": n_fail,
        "pass": n_fail == 0,
    }
    atomic_write_text(args.out, json.dumps(bundle, indent=2, sort_keys=True) + "\n")
    print(f"report written to {args.out}: {len(entries)} rows, {n_fail} failures")
    return 0 if n_fail == 0 else 4


# ---------------------------------------------------------------------------
# selftest
# ---------------------------------------------------------------------------


def cmd_selftest(args) -> int:
    from .kernels import sample_child_volume, sample_duration, sign_correlation_target
    from .params import ModelParams

    failures = 0

    def check(name: str, ok: bool) -> None:
        nonlocal failures
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
        failures += 0 if ok else 1

    p = ModelParams(mu1=1.5, lam=0.0, sigma_logq=0.0, Gamma_amp=0.0, seed=5)
    rng = stream(5, "selftest")
    s = sample_duration(p, 1.0, rng, size=200_000)
    check("pareto mean ~ 3.0", abs(s.mean() - 3.0) < 0.15)
    check("pareto support s >= s0", bool(s.min() >= p.s0))
    q = sample_child_volume(p.with_updates(sigma_logq=1.0), rng, size=200_000)
    check("lognormal mean ~ e^0.5", abs(q.mean() - math.exp(0.5)) < 0.03)
    check("sign target at G=1,k=1 is 1", abs(sign_correlation_target(1, p.with_updates(Gamma_amp=1.0)) - 1.0) < 1e-12)
    tape = simulate_tape(p, 20_000)
    check("tape has requested trades", tape.n_trades == 20_000)
    from .estimators import generalized_imbalance as gi

    t3 = tape.copy_with(
        times=np.array([0.0, 1.0, 2.0]),
        meta_ids=np.array([0, 0, 0]),
        signs=np.array([1, 1, -1], dtype=np.int8),
        volumes=np.array([2.0, 3.0, 1.0]),
    )
    check("I^0 of (+2,+3,-1) is 1", gi(t3, 3, 0.0).values[0] == 1.0)
    check("I^1 of (+2,+3,-1) is 4", gi(t3, 3, 1.0).values[0] == 4.0)
    check("I^2 of (+2,+3,-1) is 12", gi(t3, 3, 2.0).values[0] == 12.0)
    from .estimators import fit_power_law

    f = fit_power_law(np.array([1.0, 2.0, 4.0, 8.0, 16.0]), 2.0 * np.array([1.0, 2.0, 4.0, 8.0, 16.0]) ** 1.5)
    check("power-law fit recovers slope 1.5", abs(f.exponent - 1.5) < 1e-9)
    print("selftest:", "OK" if failures == 0 else f"{failures} failures")
    return 0 if failures == 0 else 3


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits with 2; config errors are exit 1
        self.print_usage(sys.stderr)
        raise ConfigurationError(message)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="impactflow", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate trade tapes from a config")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True, help="output tape.csv (single) or directory")
    s.add_argument("--seed", type=int, default=None, help="override the config seed")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("analyze", help="run all estimators on tape(s)")
    s.add_argument("--tape", required=True, help="tape CSV or directory of tape_*.csv")
    s.add_argument("--price", default=None, help="external price CSV (trade_idx,price)")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("predict", help="write analytic predictions for a config")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True, help="output predictions CSV")
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("report", help="pair measured exponents with predictions")
    s.add_argument("--measured", required=True, help="analyze output directory")
    s.add_argument("--pred", required=True, help="predictions CSV")
    s.add_argument("--out", required=True, help="report JSON path")
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("selftest", help="run the quick example-based checks")
    s.set_defaults(func=cmd_selftest)

    s = sub.add_parser("write-default-config", help="write the default config")
    s.add_argument("--out", required=True)
    s.set_defaults(func=lambda a: (write_config(default_config(), a.out), print(f"wrote {a.out}"))[0] or 0)
    return ap


def run_cli(argv=None) -> int:
    _configure_threads()
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except TapeFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ImpactflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
