"""Deterministic figure rendering from sweep outputs.

Four figure kinds: per-distance threshold curves (log-y, optional threshold
line and power-law guides), heatmaps over a noise plane, gain maps with gray
cells where the gain is undefined, and decoder-latency histograms.  Output
is SVG and PNG with pinned metadata so repeated renders are byte-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
from matplotlib.colors import LogNorm, SymLogNorm

from .data import (
    DataError,
    apply_filter,
    load_points,
    load_report,
    rectangular_grid,
    require_columns,
)

KINDS = ("threshold_curves", "heatmap", "gain_map", "latency_hist")

_STYLE = {
    "figure.figsize": (6.0, 4.2),
    "figure.dpi": 160,
    "savefig.dpi": 160,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "atomloss-plots",
}


@dataclass
class FigureSpec:
    kind: str
    name: str
    input: Path
    out_dir: Path
    x: str = "p_l"
    y: str = "eps_r"
    value: str = "eps_r"
    series: str = "d"
    filter: dict = field(default_factory=dict)
    report: Path | None = None
    threshold_key: str | None = None
    powerlaw_keys: list[str] = field(default_factory=list)
    decoder: str = "fast"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DataError(f"unknown figure kind {self.kind!r}")


def _save(fig, spec: FigureSpec) -> list[Path]:
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for ext in ("svg", "png"):
        path = spec.out_dir / f"{spec.name}.{ext}"
        meta = {"Date": None} if ext == "svg" else {"Software": None}
        fig.savefig(path, metadata=meta)
        paths.append(path)
    plt.close(fig)
    return paths


def _threshold_curves(spec: FigureSpec):
    rows = load_points(spec.input)
    require_columns(rows, [spec.x, spec.y, spec.series, "stderr", "rounds"])
    rows = apply_filter(rows, spec.filter)
    if not rows:
        raise DataError("no rows left after filtering")
    fig, ax = plt.subplots()
    series_vals = sorted({row[spec.series] for row in rows})
    for sv in series_vals:
        pts = sorted(
            [(r[spec.x], r[spec.y], r["stderr"] / r["rounds"]) for r in rows if r[spec.series] == sv]
        )
        xs = [p for p, _, _ in pts]
        ys = [e for _, e, _ in pts]
        es = [s for _, _, s in pts]
        label = f"{spec.series}={sv:g}" if isinstance(sv, float) else f"{spec.series}={sv}"
        ax.errorbar(xs, ys, yerr=es, marker="o", ms=3.5, lw=1.2, capsize=2, label=label)
    report = load_report(spec.report) if spec.report else {}
    if spec.threshold_key:
        th = report.get("thresholds", {}).get(spec.threshold_key)
        if th and th.get("p_l") is not None:
            ax.axvline(th["p_l"], color="crimson", ls="--", lw=1.0)
            ax.annotate(
                f"threshold {100 * th['p_l']:.2f}%",
                (th["p_l"], ax.get_ylim()[0]),
                textcoords="offset points",
                xytext=(4, 10),
                color="crimson",
                fontsize=8,
            )
    for key in spec.powerlaw_keys:
        fit = report.get("powerlaw_fits", {}).get(key)
        if fit and fit.get("exponent") is not None:
            xs = sorted({row[spec.x] for row in rows})
            grid = np.geomspace(min(xs), max(xs), 64)
            guide = np.exp(fit["log_prefactor"]) * grid ** fit["exponent"]
            ax.plot(grid, guide, color="gray", ls="-.", lw=0.9, alpha=0.7)
    ax.set_yscale("log")
    ax.set_xlabel(spec.x)
    ax.set_ylabel(spec.y)
    ax.legend(loc="lower right", fontsize=8)
    return fig


def _heatmap(spec: FigureSpec):
    rows = load_points(spec.input)
    require_columns(rows, [spec.x, spec.y, spec.value])
    rows = apply_filter(rows, spec.filter)
    if not rows:
        raise DataError("no rows left after filtering")
    xs, ys, grid = _pivot(rows, spec.x, spec.y, spec.value)
    fig, ax = plt.subplots()
    positive = grid[np.isfinite(grid) & (grid > 0)]
    norm = LogNorm(vmin=positive.min(), vmax=positive.max()) if positive.size else None
    masked = np.ma.masked_invalid(grid)
    cmap = plt.get_cmap("viridis").copy()
    cmap.set_bad("lightgray")
    mesh = ax.pcolormesh(_edges(xs), _edges(ys), masked, norm=norm, cmap=cmap)
    fig.colorbar(mesh, ax=ax, label=spec.value)
    ax.set_xlabel(spec.x)
    ax.set_ylabel(spec.y)
    return fig


def _gain_map(spec: FigureSpec):
    if spec.report is None:
        raise DataError("gain_map needs the report (gains are not recomputed)")
    report = load_report(spec.report)
    gains = report.get("gains", [])
    rows = []
    for g in gains:
        if g.get("decoder") != spec.decoder:
            continue
        keep = True
        for key, want in spec.filter.items():
            if key not in g:
                raise DataError(f"missing columns: {key}")
            keep = keep and abs(float(g[key]) - float(want)) < 1e-12
        if keep:
            rows.append(g)
    if not rows:
        raise DataError("no gain entries match the filter")
    xs, ys, grid = _pivot(rows, spec.x, spec.y, "gain", allow_none=True)
    fig, ax = plt.subplots()
    masked = np.ma.masked_invalid(grid)
    finite = masked.compressed()
    span = max(1e-3, float(np.abs(finite).max())) if finite.size else 1.0
    cmap = plt.get_cmap("coolwarm").copy()
    cmap.set_bad("gray")
    norm = SymLogNorm(linthresh=0.1, vmin=-span, vmax=span)
    mesh = ax.pcolormesh(_edges(xs), _edges(ys), masked, cmap=cmap, norm=norm)
    fig.colorbar(mesh, ax=ax, label="gain (log10)")
    ax.set_xlabel(spec.x)
    ax.set_ylabel(spec.y)
    return fig


def _latency_hist(spec: FigureSpec):
    if spec.report is None:
        raise DataError("latency_hist needs the report")
    report = load_report(spec.report)
    timing = report.get("timing", {})
    fig, axes = plt.subplots(1, 2, figsize=(7.5, 3.4))
    panels = [
        ("graph_hist", "graph_us_per_round", "loss-graph build (us/round)"),
        ("posterior_hist", "posterior_us_per_edge", "posterior update (us/edge)"),
    ]
    for ax, (hist_key, stat_key, label) in zip(axes, panels):
        hist = timing.get(hist_key)
        if not hist:
            raise DataError(f"report has no timing histogram {hist_key!r}")
        edges = np.asarray(hist["edges"])
        counts = np.asarray(hist["counts"])
        ax.stairs(counts, edges, fill=True, alpha=0.7)
        stats = timing.get(stat_key, {})
        if "mean" in stats:
            ax.axvline(stats["mean"], color="crimson", ls="--", lw=1.0)
        ax.set_xlabel(label)
        ax.set_ylabel("shots")
    fig.tight_layout()
    return fig


def _pivot(rows, x, y, value, allow_none=False):
    xs = sorted({float(r[x]) for r in rows})
    ys = sorted({float(r[y]) for r in rows})
    rectangular_grid(
        [{x: float(r[x]), y: float(r[y])} for r in rows], x, y
    )
    grid = np.full((len(ys), len(xs)), np.nan)
    xi = {v: i for i, v in enumerate(xs)}
    yi = {v: i for i, v in enumerate(ys)}
    for r in rows:
        val = r[value]
        if val is None:
            if not allow_none:
                raise DataError(f"null {value} cell at ({r[x]}, {r[y]})")
            continue
        grid[yi[float(r[y])], xi[float(r[x])]] = float(val)
    return xs, ys, grid


def _edges(vals):
    vals = np.asarray(vals, dtype=float)
    if len(vals) == 1:
        pad = abs(vals[0]) * 0.5 or 0.5
        return np.array([vals[0] - pad, vals[0] + pad])
    mids = (vals[1:] + vals[:-1]) / 2
    first = vals[0] - (mids[0] - vals[0])
    last = vals[-1] + (vals[-1] - mids[-1])
    return np.concatenate([[first], mids, [last]])


_RENDERERS = {
    "threshold_curves": _threshold_curves,
    "heatmap": _heatmap,
    "gain_map": _gain_map,
    "latency_hist": _latency_hist,
}


def render(spec: FigureSpec) -> list[Path]:
    """Render one figure spec to SVG and PNG; returns the written paths."""
    with matplotlib.rc_context(_STYLE):
        fig = _RENDERERS[spec.kind](spec)
        return _save(fig, spec)
