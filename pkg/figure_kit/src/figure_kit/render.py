"""Figure rendering for the order-flow pipeline CSV exports.

Nine figure styles, mirroring the analysis battery: impact-decay comparison
(fig1), imbalance distribution collapse (fig2), sign memory by volume bin
(fig3), generalized-imbalance moment scaling (fig4), aggregated-impact
collapse (fig5), price-moment scaling (fig6), covariance exponent versus a
(fig7), correlation curves/heatmap (fig8), and correlation versus a with
the two-term model overlay (fig9).

Rendering is a pure function of the input CSVs; nothing is recomputed from
tapes.  The only numerical operation performed here is the fig9 overlay
fit, which estimates (A, B, sigma_l) of the two-term correlation model for
a < 1.5 using the lambda*sigma_l^2 slope read from the exponent CSV.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from . import loaders  # noqa: E402
from .loaders import SchemaError  # noqa: E402

FIGURE_IDS = tuple(f"fig{k}" for k in range(1, 10))


@dataclass
class FigureSpec:
    """What to render: figure id, input CSV paths, scales, output path."""

    figure_id: str
    inputs: dict
    output: str | Path
    log_x: bool = True
    log_y: bool = True
    title: str | None = None
    meta: dict = field(default_factory=dict)


def correlation_two_term(a, log_T, A, B, sigma_l2, lam_sigma2):
    a = np.asarray(a, dtype=float)
    return np.exp(-0.5 * sigma_l2 * a**2) * (
        A * np.exp(0.5 * sigma_l2 * a) + B * np.exp(lam_sigma2 * a * log_T)
    )


def fit_two_term_correlation(a, r, log_T, lam_sigma2, a_max=1.5):
    """Fit (A, B, sigma_l) of the two-term correlation model for a < a_max."""
    from scipy.optimize import curve_fit

    a = np.asarray(a, dtype=float)
    r = np.asarray(r, dtype=float)
    keep = (a <= a_max) & np.isfinite(r)
    if keep.sum() < 4:
        raise SchemaError("fig9 fit needs at least 4 correlation points below a_max")

    def model(aa, A, B, s2):
        return correlation_two_term(aa, log_T, A, B, s2, lam_sigma2)

    r0 = float(r[keep][0])
    popt, _ = curve_fit(
        model, a[keep], r[keep], p0=[0.5 * r0, 0.5 * r0, 1.0],
        bounds=([0.0, 0.0, 1e-3], [np.inf, np.inf, 25.0]), maxfev=20000,
    )
    return {"A": float(popt[0]), "B": float(popt[1]), "sigma_l2": float(popt[2]), "sigma_l": math.sqrt(float(popt[2]))}


def _new_axes(spec: FigureSpec, n=1, width=6.4):
    fig, axes = plt.subplots(1, n, figsize=(width * n, 4.6))
    return fig, (axes if n > 1 else [axes])


def _finish(fig, spec: FigureSpec) -> Path:
    out = Path(spec.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=130)
    plt.close(fig)
    return out


def _fig1(spec):
    t, curves = loaders.load_trajectories(spec.inputs["trajectories"])
    fig, (ax,) = _new_axes(spec)
    for mode, style in (("two_time", "-"), ("standard", "--"), ("permanent", ":")):
        ax.plot(t, curves[mode], style, label=mode.replace("_", " "))
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("time since metaorder start")
    ax.set_ylabel("impact")
    ax.set_title(spec.title or "impact growth and decay by propagator mode")
    ax.legend()
    return _finish(fig, spec)


def _fig2(spec):
    scan, hists, chi = loaders.load_collapse(spec.inputs["collapse_scan"], spec.inputs["imbalance_hist"])
    fig, (ax1, ax2) = _new_axes(spec, n=2, width=5.2)
    for T, pts in sorted(hists.items()):
        x, y = zip(*pts)
        ax1.plot(x, y, label=f"T={T}")
    x = np.asarray(sorted(x))
    ref = [p for p in hists[max(hists)] if p[1] > 0]
    var = float(np.average([c * c for c, _ in ref], weights=[d for _, d in ref]))
    g = np.exp(-(x**2) / (2 * var)) / math.sqrt(2 * math.pi * var)
    ax1.plot(x, g, "k:", label="Gaussian ref")
    ax1.set_yscale("log")
    ax1.set_xlabel(f"I^0 T^(-chi), chi={chi:.3f}")
    ax1.set_ylabel("density")
    ax1.legend(fontsize=7)
    cx, cy = zip(*scan)
    ax2.plot(cx, cy)
    ax2.axvline(chi, color="r", ls="--", label=f"best chi={chi:.3f}")
    ax2.set_xlabel("chi")
    ax2.set_ylabel("max pairwise KS")
    ax2.legend()
    fig.suptitle(spec.title or "sign-imbalance distribution collapse")
    return _finish(fig, spec)


def _fig3(spec):
    bins, curves = loaders.load_autocorr(spec.inputs["autocorr_bins"], spec.inputs["autocorr_curves"])
    fig, (ax,) = _new_axes(spec)
    for row in bins:
        b = int(row["bin"])
        if int(row["flagged_largest"]) or not int(row["reliable"]):
            continue
        pts = [(k, c) for k, c in curves.get(b, []) if c > 0]
        if not pts:
            continue
        lag, c = zip(*pts)
        g = float(row["gamma"])
        ax.plot(lag, c, "o-", ms=3, label=f"q~{float(row['q_center']):.2g}: gamma={g:.2f}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("lag (bin-restricted trade time)")
    ax.set_ylabel("sign autocorrelation")
    ax.set_title(spec.title or "sign memory by child-volume bin")
    ax.legend(fontsize=7)
    return _finish(fig, spec)


def _fig4(spec):
    surfaces = loaders.load_surfaces(spec.inputs["surfaces"])
    expo = loaders.load_exponents(spec.inputs["exponents"])
    fig, (ax1, ax2) = _new_axes(spec, n=2, width=5.2)
    for stat, marker in (("moment_2", "o"), ("moment_4", "s"), ("moment_6", "^")):
        pts = sorted((e["a"], e["exponent"]) for e in expo if e["statistic"] == stat)
        if pts:
            a, z = zip(*pts)
            ax1.plot(a, z, marker + "-", ms=3, label=stat.replace("moment_", "2n="))
    ax1.set_xlabel("a")
    ax1.set_ylabel("scaling exponent of Sigma_a^(2n)")
    ax1.axhline(1.0, color="k", lw=0.5)
    ax1.legend()
    rows = surfaces.get("moment_2", [])
    for a_show in (0.0, 1.0, 2.0):
        pts = sorted((T, v) for T, a, v, _ in rows if abs(a - a_show) < 1e-9)
        if pts:
            T, v = zip(*pts)
            ax2.plot(T, v, "o-", ms=3, label=f"a={a_show:g}")
    ax2.set_xscale("log")
    ax2.set_yscale("log")
    ax2.set_xlabel("T (trades)")
    ax2.set_ylabel("Sigma_a^2")
    ax2.legend()
    fig.suptitle(spec.title or "generalized imbalance moment scaling")
    return _finish(fig, spec)


def _fig5(spec):
    curves = loaders.load_aggregated(spec.inputs["aggregated_impact"])
    meta = loaders.load_analysis_meta(spec.inputs.get("analysis", ""))
    chi = float(meta.get("collapse_best_chi", 0.7))
    fig, (ax,) = _new_axes(spec)
    for T, pts in sorted(curves.items()):
        x = np.array([p[0] for p in pts]) * T ** (-chi)
        y = np.array([p[1] for p in pts]) * T ** (-0.5)
        ax.plot(x, y, "o-", ms=3, label=f"T={T}")
    omega = chi - 0.5
    ax.set_xlabel(f"I^0 T^(-chi), chi={chi:.3f}")
    ax.set_ylabel("E[Delta | I] T^(-1/2)")
    ax.set_title(spec.title or f"aggregated impact collapse (omega = chi - 1/2 = {omega:.3f})")
    ax.legend(fontsize=7)
    return _finish(fig, spec)


def _fig6(spec):
    surfaces = loaders.load_surfaces(spec.inputs["surfaces"])
    expo = loaders.load_exponents(spec.inputs["exponents"])
    fig, (ax,) = _new_axes(spec)
    for n, marker in ((1, "o"), (2, "s"), (3, "^")):
        stat = f"price_moment_{2*n}"
        rows = sorted((T, v) for T, a, v, _ in surfaces.get(stat, []))
        if not rows:
            raise SchemaError(f"missing statistic {stat!r} in surfaces")
        zeta = [e["exponent"] for e in expo if e["statistic"] == stat]
        T, v = zip(*rows)
        v = np.asarray(v) / v[0]
        label = f"2n={2*n}" + (f", zeta={zeta[0]:.2f}" if zeta else "")
        ax.plot(T, v, marker + "-", ms=3, label=label)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("T (trades)")
    ax.set_ylabel("E[Delta_T^(2n)] (normalized)")
    ax.set_title(spec.title or "price-change moment scaling")
    ax.legend()
    return _finish(fig, spec)


def _fig7(spec):
    expo = loaders.load_exponents(spec.inputs["exponents"])
    pts = sorted((e["a"], e["exponent"], e["stderr"]) for e in expo if e["statistic"] == "covariance")
    if not pts:
        raise SchemaError("no covariance exponent rows")
    a, z, se = map(np.asarray, zip(*pts))
    fig, (ax,) = _new_axes(spec)
    ax.errorbar(a, z, yerr=np.where(np.isfinite(se), se, 0.0), fmt="o-", ms=4)
    k = int(np.argmin(z))
    ax.plot([a[k]], [z[k]], "r*", ms=14, label=f"minimum at a={a[k]:g}")
    ax.set_xlabel("a")
    ax.set_ylabel("exponent of E[Delta_T I_T^a]")
    ax.set_title(spec.title or "covariance scaling exponent vs a")
    ax.legend()
    return _finish(fig, spec)


def _correlation_matrix(surfaces):
    rows = surfaces.get("correlation")
    if not rows:
        raise SchemaError("no correlation rows in surfaces")
    Ts = sorted({T for T, _, _, _ in rows})
    As = sorted({a for _, a, _, _ in rows})
    M = np.full((len(Ts), len(As)), np.nan)
    for T, a, v, _ in rows:
        M[Ts.index(T), As.index(a)] = v
    return np.asarray(Ts), np.asarray(As), M


def _fig8(spec):
    surfaces = loaders.load_surfaces(spec.inputs["surfaces"])
    Ts, As, M = _correlation_matrix(surfaces)
    fig, (ax1, ax2) = _new_axes(spec, n=2, width=5.2)
    for j, a in enumerate(As):
        if j % max(1, len(As) // 6) == 0:
            ax1.plot(Ts, M[:, j], "o-", ms=3, label=f"a={a:g}")
    ax1.set_xscale("log")
    ax1.set_xlabel("T (trades)")
    ax1.set_ylabel("R_a(T)")
    ax1.legend(fontsize=7)
    im = ax2.pcolormesh(As, np.log10(Ts), M, shading="nearest")
    fig.colorbar(im, ax=ax2, label="R_a(T)")
    ax2.set_xlabel("a")
    ax2.set_ylabel("log10 T")
    fig.suptitle(spec.title or "correlation between price changes and I^a")
    return _finish(fig, spec)


def _fig9(spec):
    surfaces = loaders.load_surfaces(spec.inputs["surfaces"])
    expo = loaders.load_exponents(spec.inputs["exponents"])
    Ts, As, M = _correlation_matrix(surfaces)
    # lambda sigma_l^2 from the measured moment-exponent slope (a <= 1.5)
    pts = sorted((e["a"], e["exponent"]) for e in expo if e["statistic"] == "moment_2" and e["a"] <= 1.5)
    if len(pts) < 3:
        raise SchemaError("fig9 needs moment_2 exponent rows for a <= 1.5")
    aa, zz = map(np.asarray, zip(*pts))
    lam_sigma2 = -float(np.polyfit(aa, zz, 1)[0]) / 2.0
    fig, (ax,) = _new_axes(spec)
    fits = {}
    show = [T for T in Ts if T >= Ts[len(Ts) // 3]][:4] or list(Ts[:4])
    agrid = np.linspace(As.min(), min(1.5, As.max()), 120)
    for T in show:
        i = list(Ts).index(T)
        ax.plot(As, M[i], "o", ms=4, label=f"T={T}")
        try:
            fit = fit_two_term_correlation(As, M[i], math.log(T), lam_sigma2)
        except (SchemaError, RuntimeError):
            continue
        fits[int(T)] = fit
        ax.plot(agrid, correlation_two_term(agrid, math.log(T), fit["A"], fit["B"], fit["sigma_l2"], lam_sigma2),
                "-", lw=1)
    if fits:
        sig = np.mean([f["sigma_l"] for f in fits.values()])
        ax.set_title((spec.title or "R_a vs a with two-term model") + f" (fitted sigma_l ~ {sig:.2f})")
        spec.meta["fitted_sigma_l"] = float(sig)
        spec.meta["fits"] = fits
        spec.meta["lam_sigma2"] = lam_sigma2
    ax.set_xlabel("a")
    ax.set_ylabel("R_a(T)")
    ax.legend(fontsize=7)
    return _finish(fig, spec)


_RENDERERS = {
    "fig1": _fig1,
    "fig2": _fig2,
    "fig3": _fig3,
    "fig4": _fig4,
    "fig5": _fig5,
    "fig6": _fig6,
    "fig7": _fig7,
    "fig8": _fig8,
    "fig9": _fig9,
}


def render(spec: FigureSpec) -> Path:
    """Render one figure; raises SchemaError (and writes nothing) on bad input."""
    if spec.figure_id not in _RENDERERS:
        raise SchemaError(f"unknown figure id {spec.figure_id!r}")
    return _RENDERERS[spec.figure_id](spec)
