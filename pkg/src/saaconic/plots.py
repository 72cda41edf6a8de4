"""Deterministic figure emission for sweep and path records.

Figures are rendered with matplotlib straight to SVG next to the
delimited output.  Reproducibility of the bytes is pinned down by a
fixed hash salt for generated element ids and by stripping the creation
date from the metadata.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "saaconic"

import matplotlib.pyplot as plt
import numpy as np

from .errors import InputContractError
from .lab import SweepRecord


def loglog_slope(x, y) -> float:
    """Least-squares slope of log y against log x (positive pairs only)."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    keep = (x > 0) & (y > 0)
    if keep.sum() < 2 or np.unique(x[keep]).size < 2:
        return float("nan")
    coef = np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)
    return float(coef[0])


def _save(fig, path: Path) -> Path:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def _series_by_method(records, xkey, ykey):
    out = {}
    for rec in sorted(records, key=lambda r: (r.method, getattr(r, xkey) or 0, r.seed, r.stage)):
        if rec.error:
            continue
        x = getattr(rec, xkey)
        y = getattr(rec, ykey)
        if x is None or y is None or not np.isfinite(y):
            continue
        out.setdefault(rec.method, ([], []))
        out[rec.method][0].append(float(x))
        out[rec.method][1].append(float(y))
    return out


def emit_plots(records: list[SweepRecord], out_dir) -> list[Path]:
    """Render the standard charts for a record list; returns written files.

    - objective value against sample size (log x),
    - constraint violation against the penalty weight (log-log, with the
      fitted slope in the legend),
    - aggregated multiplier norm against sample size (log x).
    """
    if not records:
        raise InputContractError("no records to plot")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    series = _series_by_method(records, "N", "opt_value")
    if series:
        fig, ax = plt.subplots(figsize=(5.0, 3.4))
        for method, (xs, ys) in sorted(series.items()):
            ax.plot(xs, ys, "o-", ms=3.5, lw=1.0, label=method)
        ax.set_xscale("log")
        ax.set_xlabel("sample size N")
        ax.set_ylabel("objective value")
        ax.legend(fontsize=8)
        fig.tight_layout()
        written.append(_save(fig, out_dir / "opt_value_vs_N.svg"))

    series = _series_by_method(records, "gamma", "primal_feasibility")
    pairs = [(x, y) for xs, ys in series.values() for x, y in zip(xs, ys)]
    if pairs:
        fig, ax = plt.subplots(figsize=(5.0, 3.4))
        xs = [p[0] for p in pairs]
        ys = [p[1] for p in pairs]
        slope = loglog_slope(xs, ys)
        ax.plot(xs, ys, "o-", ms=3.5, lw=1.0,
                label=f"violation (slope {slope:.3f})" if np.isfinite(slope) else "violation")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("penalty weight")
        ax.set_ylabel("max constraint violation")
        ax.legend(fontsize=8)
        fig.tight_layout()
        written.append(_save(fig, out_dir / "violation_vs_gamma.svg"))

    series = _series_by_method(records, "N", "multiplier_norm")
    if series:
        fig, ax = plt.subplots(figsize=(5.0, 3.4))
        for method, (xs, ys) in sorted(series.items()):
            ax.plot(xs, ys, "o-", ms=3.5, lw=1.0, label=method)
        ax.set_xscale("log")
        ax.set_xlabel("sample size N")
        ax.set_ylabel("aggregate multiplier norm")
        ax.legend(fontsize=8)
        fig.tight_layout()
        written.append(_save(fig, out_dir / "multiplier_norm_vs_N.svg"))

    return written
