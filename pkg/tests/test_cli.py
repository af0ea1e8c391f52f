import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from revpref import Dataset
from revpref.cli import main
from revpref.core import write_csv


def _run(capsys, *argv):
    rc = main([str(a) for a in argv])
    out = capsys.readouterr()
    return rc, out.out, out.err


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "agent.json"
    path.write_text(json.dumps({"a": [0.6, 0.4], "alpha": [1.0, 1.0], "tau_star": 26, "noise_sigma": 0.7}))
    return path


def test_consistent_dataset_exits_zero(tmp_path, capsys, cobb_douglas_data):
    path = tmp_path / "d.csv"
    write_csv(cobb_douglas_data, path)
    rc, out, _ = _run(capsys, "check", path)
    payload = json.loads(out)
    assert rc == 0
    assert payload["passed"] and payload["method"] == "exact"
    assert len(payload["certificate"]["lambda"]) == cobb_douglas_data.T


def test_single_row_file(tmp_path, capsys):
    path = tmp_path / "one.csv"
    path.write_text("t,p1,p2,x1,x2\n1,1.0,2.0,3.0,1.0\n")
    rc, out, _ = _run(capsys, "check", path)
    assert rc == 0 and json.loads(out)["passed"]


def test_violating_pair_reports_witness(tmp_path, capsys, violating_pair):
    path = tmp_path / "v.csv"
    write_csv(violating_pair, path)
    out_path = tmp_path / "report.json"
    rc, _, _ = _run(capsys, "check", path, "--out", out_path)
    payload = json.loads(out_path.read_text())
    assert rc == 1
    assert payload["witness"] == [1, 2] and payload["cycle"] == [1, 2, 1]


def test_embedded_check(tmp_path, capsys):
    rng = np.random.default_rng(0)
    P = rng.uniform(1, 2, (6, 300))
    X = (1.0 / 300) * 5.0 / P
    path = tmp_path / "wide.csv"
    write_csv(Dataset.from_arrays(P, X), path)
    rc, out, _ = _run(capsys, "check", path, "--embed", 0.1, 0.65, 3)
    payload = json.loads(out)
    assert rc == 0
    assert payload["method"] == "embedded"
    emb = payload["embedding"]
    assert emb["n"] == 12 and emb["seed"] == 3
    assert emb["savings"] == pytest.approx(300 / emb["k"])


def test_simulate_then_detect(tmp_path, capsys, config):
    rc, out, _ = _run(capsys, "simulate", "--config", config, "--out-dir", tmp_path / "sim", "--seed", 4)
    assert rc == 0
    files = json.loads(out)
    rc, out, _ = _run(capsys, "detect", files["clean"])
    payload = json.loads(out)
    assert rc == 0
    assert 26 in payload["feasible_taus"]
    assert payload["headline_tau"] == min(payload["feasible_taus"])
    assert payload["min_alpha_certificate"]["tau"] == payload["headline_tau"]


def test_simulate_is_seeded(tmp_path, capsys, config):
    for name in ("a", "b"):
        _run(capsys, "simulate", "--config", config, "--out-dir", tmp_path / name, "--seed", 9, "--T", 12)
    assert (tmp_path / "a" / "noisy.csv").read_text() == (tmp_path / "b" / "noisy.csv").read_text()


def test_noisy_detect_with_curve(tmp_path, capsys, config):
    _run(capsys, "simulate", "--config", config, "--out-dir", tmp_path, "--seed", 1, "--T", 12)
    curve = tmp_path / "curve.csv"
    rc, out, _ = _run(
        capsys, "detect", tmp_path / "noisy.csv", "--noisy", 0.7, 0.05, 500, 0, "--curve-out", curve
    )
    payload = json.loads(out)
    assert rc in (0, 1)
    assert rc == (0 if payload["decision"] == "H0" else 1)
    assert payload["mode"] == "perturbed" and 1 <= payload["tau_hat"] <= 12
    with open(curve, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["tau", "phi"] and len(rows) == 13


def test_predict_exhausts_budget(tmp_path, capsys, cobb_douglas_data):
    data = tmp_path / "d.csv"
    write_csv(cobb_douglas_data, data)
    probes = tmp_path / "probes.csv"
    probes.write_text("p1,p2\n1.0,1.5\n2.0,1.0\n")
    rc, out, _ = _run(capsys, "predict", data, probes, "--budget", 5)
    payload = json.loads(out)
    assert rc == 0 and payload["phi_star"] == 0.0
    for pred, p in zip(payload["predictions"], ([1.0, 1.5], [2.0, 1.0])):
        assert np.dot(p, pred["response"]) == pytest.approx(5.0, abs=1e-6)


def test_predict_on_inconsistent_data(tmp_path, capsys, violating_pair):
    data = tmp_path / "v.csv"
    write_csv(violating_pair, data)
    probes = tmp_path / "probes.csv"
    probes.write_text("1.0,1.0\n")
    rc, out, _ = _run(capsys, "predict", data, probes, "--budget", 2)
    assert rc == 0 and json.loads(out)["phi_star"] > 0


def test_roc_writes_table(tmp_path, capsys, config):
    out_csv = tmp_path / "roc.csv"
    rc, out, _ = _run(
        capsys, "roc", "--config", config, "--out", out_csv, "--n-trials", 2, "--n-samples", 100, "--T", 10
    )
    assert rc == 0
    assert set(json.loads(out)["auc"]) == {"rp", "cusum"}
    assert out_csv.read_text().splitlines()[0] == "method,threshold,fpr,tpr,n_trials,seed"


@pytest.mark.parametrize(
    "argv",
    [
        ["check", "missing.csv"],
        ["detect", "missing.csv"],
        ["simulate", "--config", "missing.json", "--out-dir", "x"],
    ],
)
def test_errors_exit_two(tmp_path, capsys, argv):
    rc, _, err = _run(capsys, *[tmp_path / a if a.startswith("missing") else a for a in argv])
    assert rc == 2 and err.startswith("error:")


def test_bad_rows_exit_two(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("t,p1,p2,x1,x2\n1,0.0,1.0,1.0,1.0\n")
    rc, _, err = _run(capsys, "check", path)
    assert rc == 2 and "error" in err


def test_module_entry_point(tmp_path, violating_pair):
    path = tmp_path / "v.csv"
    write_csv(violating_pair, path)
    proc = subprocess.run([sys.executable, "-m", "revpref", "check", str(path)], capture_output=True, text=True)
    assert proc.returncode == 1
    assert json.loads(proc.stdout)["passed"] is False
