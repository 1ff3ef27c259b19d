"""Input loading for figure rendering.

The plotter never computes physics: every number comes from the sweep's
points.csv or report.json, and missing fields fail loudly.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

NUMERIC = {
    "d",
    "rounds",
    "p_l",
    "p_c",
    "p_d",
    "shots",
    "errors",
    "eps",
    "eps_r",
    "stderr",
    "t_graph_us_mean",
    "t_post_us_mean",
}


class DataError(Exception):
    pass


def load_points(path: Path) -> list[dict]:
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None:
            raise DataError(f"{path}: empty CSV")
        rows = []
        for raw in reader:
            row = {}
            for key, val in raw.items():
                if key in NUMERIC:
                    row[key] = float(val)
                else:
                    row[key] = val
            rows.append(row)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return rows


def load_report(path: Path) -> dict:
    with open(path) as f:
        return json.load(f)


def require_columns(rows: list[dict], columns) -> None:
    missing = [c for c in columns if c not in rows[0]]
    if missing:
        raise DataError(f"missing columns: {', '.join(missing)}")


def apply_filter(rows: list[dict], flt: dict) -> list[dict]:
    require_columns(rows, flt.keys())
    out = []
    for row in rows:
        ok = True
        for key, want in flt.items():
            have = row[key]
            if isinstance(have, float):
                ok = ok and abs(have - float(want)) < 1e-12
            else:
                ok = ok and have == want
        if ok:
            out.append(row)
    return out


def rectangular_grid(rows: list[dict], x: str, y: str):
    """Sorted unique axes; fails unless the rows tile the full rectangle."""
    xs = sorted({row[x] for row in rows})
    ys = sorted({row[y] for row in rows})
    seen = {(row[x], row[y]) for row in rows}
    if len(seen) != len(xs) * len(ys):
        raise DataError(
            f"heatmap needs a complete rectangular grid over ({x}, {y}); "
            f"got {len(seen)} of {len(xs) * len(ys)} cells"
        )
    return xs, ys
