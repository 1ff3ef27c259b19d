import json
import math

import pytest

from atomloss.cli import main as cli_main
from atomloss.experiments import (
    CSV_COLUMNS,
    ExperimentConfig,
    GridPoint,
    estimate_threshold,
    fit_powerlaw,
    gain,
    logical_error_per_round,
    points_csv,
    run_experiment,
    run_point,
)


def test_logical_error_per_round_values():
    assert logical_error_per_round(0.1, 9) == pytest.approx(
        1 - 0.9 ** (1 / 9)
    )
    assert logical_error_per_round(0.1, 9) == pytest.approx(0.0116379, abs=1e-6)
    assert logical_error_per_round(0.0, 5) == 0.0
    assert logical_error_per_round(0.3, 1) == pytest.approx(0.3)


def test_eps_r_monotone_and_bounded():
    for n_r in (1, 3, 9):
        prev = 0.0
        for eps in (0.01, 0.05, 0.2, 0.6):
            er = logical_error_per_round(eps, n_r)
            assert er <= eps + 1e-15
            assert er >= prev
            prev = er


def test_gain_values():
    assert gain(1e-3, 1e-4) == pytest.approx(1.0)
    assert gain(2e-3, 2e-3) == pytest.approx(0.0)
    assert gain(1e-4, 1e-3) == pytest.approx(-1.0)
    assert gain(0.0, 1e-3) is None
    assert gain(1e-3, 0.0) is None
    assert gain(float("nan"), 1e-3) is None


def test_threshold_on_synthetic_crossing():
    # curves eps_r = a * (p / 0.04)^d cross exactly at p = 0.04
    grid = [0.02, 0.03, 0.035, 0.045, 0.05, 0.06]
    curves = {
        3: [(p, 0.1 * (p / 0.04) ** 3, 0.0) for p in grid],
        5: [(p, 0.1 * (p / 0.04) ** 5, 0.0) for p in grid],
    }
    est, err = estimate_threshold(curves)
    assert est == pytest.approx(0.04, abs=1e-9)


def test_threshold_none_for_identical_curves():
    grid = [0.02, 0.04, 0.06]
    curve = [(p, 0.05, 0.0) for p in grid]
    assert estimate_threshold({3: curve, 5: list(curve)}) is None


def test_powerlaw_exact_fixture():
    d = 3
    pts = [(p, 0.7 * p**d) for p in (0.005, 0.01, 0.02, 0.04)]
    slope, err, _ = fit_powerlaw(pts, d)
    assert slope == pytest.approx(d, abs=1e-6)


def test_powerlaw_constant_fixture():
    pts = [(p, 0.2) for p in (0.01, 0.02, 0.04)]
    slope, _, _ = fit_powerlaw(pts, 3)
    assert slope == pytest.approx(0.0, abs=1e-9)


def test_powerlaw_requires_three_points():
    with pytest.raises(ValueError):
        fit_powerlaw([(0.01, 0.1), (0.02, 0.2)], 3)


def test_noiseless_point_has_zero_error():
    r = run_point(GridPoint(3, 2, 0.0, 0.0, 0.0, "fast"), shots=50, seed=1)
    assert r.errors == 0 and r.eps == 0.0 and r.eps_r == 0.0


def test_run_point_deterministic():
    pt = GridPoint(3, 2, 0.02, 1.0, 0.001, "fast")
    a = run_point(pt, shots=300, seed=9, adaptive=False)
    b = run_point(pt, shots=300, seed=9, adaptive=False)
    assert a.errors == b.errors and a.shots == b.shots


def test_accurate_decoder_grid_guard():
    with pytest.raises(ValueError):
        ExperimentConfig(
            [GridPoint(9, 9, 0.05, 1.0, 0.0, "accurate")], shots=10, seed=0
        )


def test_csv_columns_exact():
    r = run_point(GridPoint(3, 1, 0.0, 0.0, 0.0, "fast"), shots=5, seed=0)
    text = points_csv([r])
    header = text.splitlines()[0]
    assert header.split(",") == CSV_COLUMNS
    assert (
        header
        == "d,rounds,p_l,p_c,p_d,decoder,shots,errors,eps,eps_r,stderr,"
        "t_graph_us_mean,t_post_us_mean"
    )


def test_run_experiment_report_structure():
    cfg = ExperimentConfig(
        [
            GridPoint(3, 2, 0.02, 1.0, 0.0, "fast"),
            GridPoint(3, 2, 0.02, 1.0, 0.0, "independent"),
        ],
        shots=300,
        seed=4,
        adaptive=False,
    )
    report = run_experiment(cfg)
    payload = json.loads(report.to_json())
    assert len(payload["points"]) == 2
    assert payload["gains"] and payload["gains"][0]["decoder"] == "fast"
    assert "graph_us_per_round" in payload["timing"]
    assert "threshold_method" in payload["metadata"]


def test_cli_simulate_writes_outputs(tmp_path):
    rc = cli_main(
        [
            "simulate",
            "--distance",
            "3",
            "--rounds",
            "2",
            "--p-loss",
            "0.02",
            "--p-corr",
            "1.0",
            "--p-depol",
            "0",
            "--decoder",
            "fast",
            "--shots",
            "200",
            "--seed",
            "5",
            "--out",
            str(tmp_path),
        ]
    )
    assert rc == 0
    assert (tmp_path / "report.json").exists()
    csv = (tmp_path / "points.csv").read_text().splitlines()
    assert len(csv) == 2 and csv[0].split(",") == CSV_COLUMNS


def test_cli_sweep_from_toml(tmp_path):
    cfg = tmp_path / "sweep.toml"
    cfg.write_text(
        """
shots = 120
seed = 3
adaptive = false
out = "OUT"

[[grid]]
distances = [3]
rounds = 2
p_loss = [0.01, 0.02]
p_corr = [1.0]
p_depol = [0.0]
decoders = ["fast"]
""".replace("OUT", str(tmp_path / "out"))
    )
    rc = cli_main(["sweep", "--config", str(cfg)])
    assert rc == 0
    rows = (tmp_path / "out" / "points.csv").read_text().splitlines()
    assert len(rows) == 3


def test_cli_fatal_error_is_nonzero(tmp_path):
    rc = cli_main(
        [
            "simulate",
            "--distance",
            "4",  # even distance: rejected
            "--p-loss",
            "0.01",
            "--p-corr",
            "1",
            "--p-depol",
            "0",
            "--decoder",
            "fast",
            "--shots",
            "10",
            "--seed",
            "1",
            "--out",
            str(tmp_path),
        ]
    )
    assert rc == 1
