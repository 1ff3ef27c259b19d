"""Command-line front end: single-point `simulate` and declarative `sweep`.

Outputs `report.json` (full report) and `points.csv` next to it.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .experiments import (
    ExperimentConfig,
    GridPoint,
    points_csv,
    run_experiment,
)
from .pipeline import DECODERS


def _parse_args(argv):
    ap = argparse.ArgumentParser(prog="atomloss")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one grid point")
    sim.add_argument("--distance", type=int, required=True)
    sim.add_argument("--rounds", type=int, default=None, help="default: distance")
    sim.add_argument("--p-loss", type=float, required=True)
    sim.add_argument("--p-corr", type=float, required=True)
    sim.add_argument("--p-depol", type=float, required=True)
    sim.add_argument("--decoder", choices=DECODERS, required=True)
    sim.add_argument("--shots", type=int, required=True)
    sim.add_argument("--seed", type=int, required=True)
    sim.add_argument("--out", type=Path, required=True, help="output directory")
    sim.add_argument("--no-adaptive", action="store_true")
    sim.add_argument("--workers", type=int, default=1)

    sw = sub.add_parser("sweep", help="run a declarative grid")
    sw.add_argument("--config", type=Path, required=True)
    sw.add_argument("--out", type=Path, default=None, help="override output dir")
    return ap.parse_args(argv)


def _load_sweep(path: Path) -> tuple[ExperimentConfig, Path]:
    import tomli

    with open(path, "rb") as f:
        raw = tomli.load(f)
    shots = int(raw.get("shots", 10000))
    seed = int(raw.get("seed", 0))
    adaptive = bool(raw.get("adaptive", True))
    workers = int(raw.get("workers", 1))
    out_dir = Path(raw.get("out", path.parent / "sweep_out"))
    points: list[GridPoint] = []
    for grid in raw.get("grid", []):
        distances = grid["distances"]
        rounds = grid.get("rounds")
        for d in distances:
            r = int(rounds) if rounds else int(d)
            for p_l in grid["p_loss"]:
                for p_c in grid["p_corr"]:
                    for p_d in grid["p_depol"]:
                        for dec in grid["decoders"]:
                            points.append(
                                GridPoint(int(d), r, float(p_l), float(p_c), float(p_d), dec)
                            )
    return (
        ExperimentConfig(points, shots=shots, seed=seed, adaptive=adaptive, workers=workers),
        out_dir,
    )


def _write_outputs(report, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(report.to_json())
    (out_dir / "points.csv").write_text(points_csv(report.points))
    for r in report.points:
        pt = r.point
        print(
            f"d={pt.d} rounds={pt.rounds} p_l={pt.p_l} p_c={pt.p_c} p_d={pt.p_d}"
            f" {pt.decoder}: eps_r={r.eps_r:.3e} +- {r.stderr:.1e}"
            f" ({r.errors}/{r.shots} errors, {r.failures} decode failures)"
        )
    for name, th in report.thresholds.items():
        print(f"threshold[{name}]: p_l = {th['p_l']:.4f} +- {th['error']:.4f}")


def main(argv=None) -> int:
    args = _parse_args(argv if argv is not None else sys.argv[1:])
    try:
        if args.command == "simulate":
            rounds = args.rounds if args.rounds is not None else args.distance
            pt = GridPoint(
                args.distance, rounds, args.p_loss, args.p_corr, args.p_depol, args.decoder
            )
            cfg = ExperimentConfig(
                [pt],
                shots=args.shots,
                seed=args.seed,
                adaptive=not args.no_adaptive,
                workers=args.workers,
            )
            report = run_experiment(cfg)
            _write_outputs(report, args.out)
        else:
            cfg, out_dir = _load_sweep(args.config)
            if args.out is not None:
                out_dir = args.out
            report = run_experiment(cfg)
            _write_outputs(report, out_dir)
    except Exception as exc:  # fatal: propagate as nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
