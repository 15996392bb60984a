import csv
import json

import pytest

from ckmloc.cli import main

SCENARIO = {
    "format": "ckmloc-scenario",
    "version": 1,
    "ue_region": [[60, 63], [-1, 2]],
    "prior_scatterers": [[20, -20], [35, 15], [45, 35], [15, 30]],
    "rf": {"n_subcarriers": 256, "n_antennas": 16},
    "dict": {"n_tau": 256, "n_tau_window": 64},
    "n_trials": 2,
}


@pytest.fixture
def scenario(tmp_path):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(SCENARIO))
    return path


def test_build_then_localize(tmp_path, scenario, capsys):
    out = tmp_path / "map.json"
    assert main(["build-ckm", "--scenario", str(scenario), "--out", str(out), "--mode", "true", "--seed", "3"]) == 0
    assert json.loads(capsys.readouterr().out)["entries"] == 16
    assert main(["localize", "--ckm", str(out), "--scenario", str(scenario), "--seed", "5", "--oracle-mode"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["error_m"] < 1e-2
    assert {"ue_estimate", "init", "iterations", "converged", "fallback_used"} <= report.keys()


def test_experiment_outputs(tmp_path, scenario, capsys):
    out_dir = tmp_path / "run"
    rc = main(["experiment", "--config", str(scenario), "--out-dir", str(out_dir), "--seed", "1", "--trials", "3", "--methods", "proposed,coarse"])
    assert rc == 0
    with open(out_dir / "summary.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["method"] for r in rows] == ["proposed", "coarse"]
    assert all(r["M"] == "16" and r["N_add"] == "0" for r in rows)
    with open(out_dir / "trials_M16_Nadd0.csv") as fh:
        assert len(fh.read().splitlines()) == 1 + 3 * 2


def test_errors_exit_nonzero(tmp_path, scenario, capsys):
    assert main(["localize", "--ckm", str(tmp_path / "missing.json"), "--scenario", str(scenario)]) == 1
    assert "error" in capsys.readouterr().err
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({**SCENARIO, "version": 7}))
    assert main(["experiment", "--config", str(bad), "--out-dir", str(tmp_path / "x")]) == 1
    assert main(["experiment", "--config", str(scenario), "--out-dir", str(tmp_path / "x"), "--methods", "wknn"]) == 1


def test_argument_validation(scenario):
    with pytest.raises(SystemExit) as exc:
        main(["build-ckm", "--scenario", str(scenario), "--out", "x", "--seed", "-1"])
    assert exc.value.code != 0
    with pytest.raises(SystemExit):
        main(["build-ckm", "--scenario", str(scenario), "--out", "x", "--mode", "exact"])
