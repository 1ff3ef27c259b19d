import hashlib
import json
import shutil
from pathlib import Path

import pytest

from atomloss_plots.cli import load_specs, main as cli_main
from atomloss_plots.data import DataError, load_points, load_report
from atomloss_plots.figures import FigureSpec, render

DATA = Path(__file__).parent / "data"


def _hash(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture()
def workdir(tmp_path):
    for name in ("points.csv", "report.json", "figures.toml"):
        shutil.copy(DATA / name, tmp_path / name)
    return tmp_path


def test_cli_renders_all_figures(workdir):
    out = workdir / "figs"
    rc = cli_main(
        [
            "--spec",
            str(workdir / "figures.toml"),
            "--in",
            str(workdir / "points.csv"),
            "--out-dir",
            str(out),
        ]
    )
    assert rc == 0
    names = {p.name for p in out.iterdir()}
    for stem in ("thresholds", "eps_map", "gain", "latency"):
        assert f"{stem}.svg" in names and f"{stem}.png" in names


def test_rendering_is_byte_deterministic(workdir):
    out1, out2 = workdir / "a", workdir / "b"
    for out in (out1, out2):
        rc = cli_main(
            [
                "--spec",
                str(workdir / "figures.toml"),
                "--in",
                str(workdir / "points.csv"),
                "--out-dir",
                str(out),
            ]
        )
        assert rc == 0
    for p1 in sorted(out1.iterdir()):
        p2 = out2 / p1.name
        assert _hash(p1) == _hash(p2), p1.name


def test_threshold_line_lies_inside_swept_range(workdir):
    report = load_report(workdir / "report.json")
    key, th = next(iter(report["thresholds"].items()))
    rows = load_points(workdir / "points.csv")
    p_vals = [r["p_l"] for r in rows]
    assert min(p_vals) < th["p_l"] < max(p_vals)
    spec = FigureSpec(
        kind="threshold_curves",
        name="th",
        input=workdir / "points.csv",
        out_dir=workdir / "figs",
        filter={"decoder": "fast"},
        report=workdir / "report.json",
        threshold_key=key,
    )
    paths = render(spec)
    assert all(p.exists() for p in paths)


def test_single_point_csv_renders(tmp_path):
    rows = load_points(DATA / "points.csv")
    header = ",".join(rows[0].keys())
    first = ",".join(str(v) for v in rows[0].values())
    csv = tmp_path / "one.csv"
    csv.write_text(header + "\n" + first + "\n")
    spec = FigureSpec(
        kind="threshold_curves",
        name="single",
        input=csv,
        out_dir=tmp_path / "figs",
        filter={},
    )
    paths = render(spec)
    assert all(p.exists() for p in paths)


def test_gain_map_draws_undefined_cells_gray(workdir):
    report = load_report(workdir / "report.json")
    assert any(g["gain"] is None for g in report["gains"]), "fixture needs a gray cell"
    spec = FigureSpec(
        kind="gain_map",
        name="gain2",
        input=workdir / "points.csv",
        out_dir=workdir / "figs",
        x="p_l",
        y="p_d",
        filter={"d": 3},
        report=workdir / "report.json",
        decoder="fast",
    )
    paths = render(spec)
    assert all(p.exists() for p in paths)


def test_missing_column_is_descriptive_failure(workdir):
    spec = FigureSpec(
        kind="threshold_curves",
        name="bad",
        input=workdir / "points.csv",
        out_dir=workdir / "figs",
        x="no_such_column",
    )
    with pytest.raises(DataError, match="missing columns: no_such_column"):
        render(spec)


def test_incomplete_heatmap_grid_rejected(tmp_path, workdir):
    rows = load_points(workdir / "points.csv")
    keep = [r for r in rows if r["decoder"] == "fast"]
    # drop one grid cell
    broken = keep[:-1]
    header = ",".join(keep[0].keys())
    lines = [header] + [",".join(str(v) for v in r.values()) for r in broken]
    csv = tmp_path / "broken.csv"
    csv.write_text("\n".join(lines) + "\n")
    spec = FigureSpec(
        kind="heatmap",
        name="hm",
        input=csv,
        out_dir=tmp_path / "figs",
        x="p_l",
        y="d",
        value="eps_r",
        filter={"decoder": "fast"},
    )
    with pytest.raises(DataError, match="rectangular"):
        render(spec)


def test_plotter_never_recomputes_gain(workdir):
    # strip the gains from the report: the gain map must fail, not recompute
    report = json.loads((workdir / "report.json").read_text())
    report["gains"] = []
    (workdir / "report.json").write_text(json.dumps(report))
    spec = FigureSpec(
        kind="gain_map",
        name="gain3",
        input=workdir / "points.csv",
        out_dir=workdir / "figs",
        x="p_l",
        y="p_d",
        filter={"d": 3},
        report=workdir / "report.json",
    )
    with pytest.raises(DataError):
        render(spec)


def test_spec_file_requires_figures(tmp_path, workdir):
    empty = tmp_path / "empty.toml"
    empty.write_text("report = 'report.json'\n")
    with pytest.raises(DataError):
        load_specs(empty, workdir / "points.csv", tmp_path / "figs")
