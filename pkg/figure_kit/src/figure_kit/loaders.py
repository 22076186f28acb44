"""Readers for the pipeline's CSV schemas.

Every loader validates the header and raises `SchemaError` naming the first
missing column; figure code never computes statistics, it only re-plots
what the pipeline exported.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path


class SchemaError(ValueError):
    """Input CSV does not match the documented schema."""


def _read_rows(path: str | Path, required: list[str]) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"{path}: file not found")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in required:
            if col not in header:
                raise SchemaError(f"{path}: missing column {col!r}")
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return rows


def _fnum(x: str) -> float:
    return float(x) if x not in ("", None) else math.nan


def load_surfaces(path) -> dict:
    """surfaces.csv -> {statistic: list of (T, a, value, stderr)}."""
    rows = _read_rows(path, ["statistic", "T", "a", "value", "stderr"])
    out: dict = {}
    for r in rows:
        out.setdefault(r["statistic"], []).append(
            (int(r["T"]), _fnum(r["a"]), _fnum(r["value"]), _fnum(r["stderr"]))
        )
    return out


def load_exponents(path) -> list[dict]:
    rows = _read_rows(
        path,
        ["statistic", "a", "n", "exponent", "stderr", "prefactor", "offset", "r_squared", "fit_lo", "fit_hi"],
    )
    out = []
    for r in rows:
        out.append(
            {
                "statistic": r["statistic"],
                "a": _fnum(r["a"]),
                "n": int(r["n"]) if r["n"] else None,
                "exponent": _fnum(r["exponent"]),
                "stderr": _fnum(r["stderr"]),
                "prefactor": _fnum(r["prefactor"]),
                "r_squared": _fnum(r["r_squared"]),
            }
        )
    return out


def load_autocorr(bins_path, curves_path):
    bins = _read_rows(
        bins_path,
        ["bin", "q_lo", "q_hi", "q_center", "n_trades", "reliable", "flagged_largest", "gamma", "gamma_stderr"],
    )
    curves = _read_rows(curves_path, ["bin", "lag", "corr"])
    curve_map: dict = {}
    for r in curves:
        curve_map.setdefault(int(r["bin"]), []).append((int(r["lag"]), _fnum(r["corr"])))
    return bins, curve_map


def load_collapse(scan_path, hist_path):
    scan = [(float(r["chi"]), float(r["max_ks"])) for r in _read_rows(scan_path, ["chi", "max_ks"])]
    hist_rows = _read_rows(hist_path, ["T", "chi", "bin_center", "density"])
    hists: dict = {}
    chi = None
    for r in hist_rows:
        chi = float(r["chi"])
        hists.setdefault(int(r["T"]), []).append((float(r["bin_center"]), float(r["density"])))
    return scan, hists, chi


def load_aggregated(path):
    rows = _read_rows(path, ["T", "a", "bin", "imbalance_mean", "delta_mean", "count"])
    out: dict = {}
    for r in rows:
        out.setdefault(int(r["T"]), []).append((_fnum(r["imbalance_mean"]), _fnum(r["delta_mean"])))
    return out


def load_trajectories(path):
    rows = _read_rows(path, ["t", "standard", "two_time", "permanent"])
    t = [float(r["t"]) for r in rows]
    return t, {m: [_fnum(r[m]) for r in rows] for m in ("standard", "two_time", "permanent")}


def load_analysis_meta(path) -> dict:
    path = Path(path)
    if not path.exists():
        return {}
    return json.loads(path.read_text())
