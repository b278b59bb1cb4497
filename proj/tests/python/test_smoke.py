import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest

import urbantrack as ut

SCENARIO = str(Path(__file__).resolve().parents[2] / "scenarios" / "intersection.json")
LAMBDA = 299792458.0 / 4e9


def test_trajectory_endpoint():
    traj = ut.trajectory(SCENARIO)
    assert traj.shape == (141, 6)
    assert math.hypot(traj[-1, 0] - 2068.8, traj[-1, 2] - 1667.8) < 2.0


def test_library_and_covariance_signs():
    lib = ut.make_library([0.5e-6, 1.375e-6], 11, 1e-3, LAMBDA, 40e6)
    assert len(lib) == 4
    for w in lib:
        r = ut.measurement_covariance(w, 50.0)
        rho = r[0, 1] / math.sqrt(r[0, 0] * r[1, 1])
        assert (rho < -0.5) if w.sweep == ut.Sweep.UP else (rho > 0.5)
        assert np.all(np.linalg.eigvalsh(ut.train_measurement_covariance(w, 50.0)) > 0)
    assert ut.chirp_rate_for_bandwidth(0.5e-6, 40e6) == pytest.approx(8.378e13, rel=1e-4)


def test_measurement_function():
    z = ut.measurement_function(np.array([50.0, 0.0, 0.0, 3.0, 0.0, 0.0]), np.zeros(2), np.array([100.0, 0.0]))
    assert z[0] == pytest.approx(100.0)
    assert abs(z[1]) < 1e-12
    assert ut.gate_threshold(0.99) == pytest.approx(-2.0 * math.log(0.01))


def test_simulate_writes_outputs(tmp_path):
    results = ut.simulate(SCENARIO, mode="both", runs=2, scans=10, seed=3, out=str(tmp_path))
    assert [r["mode"] for r in results] == ["closed", "open"]
    with open(tmp_path / "metrics.csv") as f:
        rows = list(csv.reader(f))
    assert rows[0][:4] == ["scan", "mode", "mean_confirmed", "mean_rmse"]
    assert len(rows) == 21
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert "rmse_reduction_pct" in summary and "confirmed_increase_pct" in summary
    assert (tmp_path / "decisions.csv").exists()

    again = ut.simulate(SCENARIO, mode="closed", runs=2, scans=10, seed=3)
    assert again[0]["metrics_csv"] == results[0]["metrics_csv"]

    cmp = ut.compare(str(tmp_path), str(tmp_path))
    assert "rmse_reduction_pct" in cmp
