"""Batch figure rendering: point at an analyze output directory, get PNGs.

Usage: figure-kit --analysis DIR [--pred pred.csv] --out DIR [--figures fig1,fig7]
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .loaders import SchemaError
from .render import FIGURE_IDS, FigureSpec, render


def default_inputs(analysis: Path, pred: Path | None) -> dict:
    base = {
        "surfaces": analysis / "surfaces.csv",
        "exponents": analysis / "exponents.csv",
        "autocorr_bins": analysis / "autocorr_bins.csv",
        "autocorr_curves": analysis / "autocorr_curves.csv",
        "collapse_scan": analysis / "collapse_scan.csv",
        "imbalance_hist": analysis / "imbalance_hist.csv",
        "aggregated_impact": analysis / "aggregated_impact.csv",
        "analysis": analysis / "analysis.json",
    }
    if pred is not None:
        base["trajectories"] = Path(str(pred).replace(".csv", ".trajectories.csv"))
    return base


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="figure-kit", description=__doc__)
    ap.add_argument("--analysis", required=True, help="analyze output directory")
    ap.add_argument("--pred", default=None, help="predictions CSV (enables fig1)")
    ap.add_argument("--out", required=True, help="output directory for PNGs")
    ap.add_argument("--figures", default=None, help="comma-separated subset, default: all applicable")
    args = ap.parse_args(argv)

    inputs = default_inputs(Path(args.analysis), Path(args.pred) if args.pred else None)
    wanted = args.figures.split(",") if args.figures else list(FIGURE_IDS)
    if args.pred is None and "fig1" in wanted and not args.figures:
        wanted.remove("fig1")
    failures = 0
    for fid in wanted:
        spec = FigureSpec(figure_id=fid, inputs=inputs, output=Path(args.out) / f"{fid}.png")
        try:
            path = render(spec)
            print(f"wrote {path}")
        except SchemaError as exc:
            print(f"error [{fid}]: {exc}", file=sys.stderr)
            failures += 1
    return 0 if failures == 0 else 1


if __name__ == "__main__":
    sys.exit(main())
