"""`plots --spec figures.toml --in points.csv --out-dir figs/`"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import tomli

from .data import DataError
from .figures import FigureSpec, render


def load_specs(spec_path: Path, points: Path, out_dir: Path) -> list[FigureSpec]:
    with open(spec_path, "rb") as f:
        raw = tomli.load(f)
    report_name = raw.get("report")
    report = points.parent / report_name if report_name else None
    specs = []
    for entry in raw.get("figure", []):
        specs.append(
            FigureSpec(
                kind=entry["kind"],
                name=entry.get("name", entry["kind"]),
                input=points,
                out_dir=out_dir,
                x=entry.get("x", "p_l"),
                y=entry.get("y", "eps_r"),
                value=entry.get("value", "eps_r"),
                series=entry.get("series", "d"),
                filter=dict(entry.get("filter", {})),
                report=report,
                threshold_key=entry.get("threshold_key"),
                powerlaw_keys=list(entry.get("powerlaw_keys", [])),
                decoder=entry.get("decoder", "fast"),
            )
        )
    if not specs:
        raise DataError(f"{spec_path}: no [[figure]] entries")
    return specs


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="plots")
    ap.add_argument("--spec", type=Path, required=True)
    ap.add_argument("--in", dest="points", type=Path, required=True)
    ap.add_argument("--out-dir", type=Path, required=True)
    args = ap.parse_args(argv if argv is not None else sys.argv[1:])
    try:
        for spec in load_specs(args.spec, args.points, args.out_dir):
            for path in render(spec):
                print(path)
    except (DataError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
