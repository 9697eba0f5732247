import csv
import hashlib
import json

import pytest

from steklov.cli import main


def _read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def _run(capsys, tmp_path, *argv):
    code = main([*argv, "--out", str(tmp_path)])
    return code, capsys.readouterr().err


@pytest.fixture
def shape_file(tmp_path):
    p = tmp_path / "shape.json"
    p.write_text(json.dumps({"rho0": 1.0, "cos": [0, 0.15]}))
    return str(p)


@pytest.fixture
def pert_file(tmp_path):
    p = tmp_path / "pert.json"
    p.write_text(json.dumps({"rho0": 0.0, "cos": [0, 1.0, 1.0], "sin": [0.5]}))
    return str(p)


def test_spectrum(capsys, tmp_path):
    code, _ = _run(capsys, tmp_path / "o", "spectrum", "--level", "3", "--k", "4")
    assert code == 0
    rows = _read_csv(tmp_path / "o" / "spectrum.csv")
    assert [r["index"] for r in rows] == ["1", "2", "3", "4"]
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["mesh"]["level"] == 3
    assert manifest["outputs"][0]["file"] == "spectrum.csv"
    digest = hashlib.sha256((tmp_path / "o" / "spectrum.csv").read_bytes()).hexdigest()
    assert manifest["outputs"][0]["sha256"] == digest


def test_outputs_are_deterministic(capsys, tmp_path, shape_file):
    digests = []
    for d in ("a", "b"):
        _run(capsys, tmp_path / d, "criticality", "--shape", shape_file, "--level", "3")
        digests.append(hashlib.sha256((tmp_path / d / "density.csv").read_bytes()).hexdigest())
    assert digests[0] == digests[1]


def test_symfun(capsys, tmp_path):
    code, _ = _run(capsys, tmp_path, "symfun", "--level", "3", "--cluster", "2,3")
    assert code == 0
    rows = _read_csv(tmp_path / "symfun.csv")
    assert float(rows[1]["Lambda"]) == pytest.approx(float(rows[0]["Lambda"]) ** 2 / 4, rel=1e-6)


def test_shape_grad(capsys, tmp_path, shape_file, pert_file):
    code, _ = _run(capsys, tmp_path, "shape-grad", "--shape", shape_file, "--pert", pert_file, "--level", "3")
    assert code == 0
    data = json.loads((tmp_path / "shape_grad.json").read_text())
    assert data["cluster"] == [1] and data["normalization"] == "sobolev"
    header = (tmp_path / "density.csv").read_text().splitlines()[0]
    assert header == "t,H,w,v2_sum,gradT2_sum,g"


def test_fd_check(capsys, tmp_path, shape_file, pert_file):
    argv = ["fd-check", "--shape", shape_file, "--pert", pert_file, "--level", "4", "--eps", "1e-2", "--fd-levels", "3"]
    code, _ = _run(capsys, tmp_path, *argv)
    assert code == 0
    rows = _read_csv(tmp_path / "fd_check.csv")
    assert len(rows) == 3
    assert float(rows[-1]["rel_gap"]) <= 1e-2


def test_criticality(capsys, tmp_path):
    code, _ = _run(capsys, tmp_path, "criticality", "--level", "3", "--cluster", "2,3", "--constraint", "perimeter")
    assert code == 0
    data = json.loads((tmp_path / "criticality.json").read_text())
    assert data["constraint"] == "perimeter" and data["residual"] < 1e-2


def test_flow(capsys, tmp_path, shape_file):
    code, _ = _run(capsys, tmp_path, "flow", "--shape", shape_file, "--level", "2", "--steps", "3")
    assert code == 0
    rows = _read_csv(tmp_path / "flow.csv")
    assert list(rows[0]) == ["step", "Lambda", "residual", "volume", "perimeter", "mode_energy"]
    assert len(rows) == 4
    final = json.loads((tmp_path / "final_shape.json").read_text())
    assert set(final) >= {"rho0", "cos", "sin"}


def test_disk_oracle(capsys, tmp_path):
    code, _ = _run(capsys, tmp_path, "disk-oracle", "--k", "3")
    assert code == 0
    rows = _read_csv(tmp_path / "disk_oracle.csv")
    assert [r["multiplicity"] for r in rows] == ["1", "2", "2"]
    assert float(rows[0]["lambda"]) == pytest.approx(0.44638996589653, rel=1e-12)


def test_malformed_shape_names_field(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"rho0": 1.0, "cos": [0.1, "oops"]}))
    code, err = _run(capsys, tmp_path / "o", "spectrum", "--shape", str(bad), "--level", "2")
    assert code == 2
    info = json.loads(err)
    assert info["error"] == "InvalidShape" and info["field"] == "cos"


def test_missing_pert(capsys, tmp_path):
    code, _ = _run(capsys, tmp_path, "shape-grad", "--level", "2")
    assert code == 2


def test_gap_violation_reports_eigenvalues(capsys, tmp_path):
    code, err = _run(capsys, tmp_path, "symfun", "--level", "3", "--cluster", "2")
    assert code == 2
    info = json.loads(err)
    assert info["error"] == "GapViolation" and len(info["eigenvalues"]) == 2


def test_not_a_cluster(capsys, tmp_path, shape_file):
    code, err = _run(capsys, tmp_path, "criticality", "--shape", shape_file, "--level", "3", "--cluster", "2,3")
    assert code == 2
    assert json.loads(err)["error"] == "NotACluster"


def test_nondiffeo_shape(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"rho0": 0.5}))
    code, err = _run(capsys, tmp_path / "o", "spectrum", "--shape", str(bad), "--level", "2")
    assert code == 2
    assert json.loads(err)["error"] == "NonDiffeo"


def test_level_out_of_range(capsys, tmp_path):
    code, _ = _run(capsys, tmp_path, "spectrum", "--level", "9")
    assert code == 2


def test_thread_limit(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("STEKLOV_THREADS", "1")
    code, _ = _run(capsys, tmp_path, "spectrum", "--level", "2")
    assert code == 0
