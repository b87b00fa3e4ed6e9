import csv
import json
import shutil
import subprocess

import numpy as np
import pytest

from qms import cli
from qms.lindblad import DBGenerator, Generator, depolarizing_generator, random_db_generator
from qms.matcore import commutator_superop, matrix_to_json


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(line for line in fh if not line.startswith("#")))


def test_run_entropy_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["run", "--suite", "entropy", "--trials", "50", "--seed", "7", "--out", str(a)]) == 0
    assert cli.main(["run", "--suite", "entropy", "--trials", "50", "--seed", "7", "--out", str(b)]) == 0
    assert (a / "report.csv").read_bytes() == (b / "report.csv").read_bytes()
    assert (a / "summary.json").read_bytes() == (b / "summary.json").read_bytes()
    rows = read_rows(a / "report.csv")
    assert rows and set(rows[0]) == {"instance_id", "check", "lambda", "trials", "worst_slack", "pass"}
    assert all(r["pass"] in ("PASS", "info") for r in rows)


@pytest.mark.parametrize("suite", ["channels", "monotone", "lindblad"])
def test_run_suites_pass(tmp_path, suite):
    assert cli.main(["run", "--suite", suite, "--trials", "10", "--n", "2", "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["failed"] == [] and summary["checks"] == summary["passed"] > 0


def test_tolerance_override_recorded(tmp_path):
    assert cli.main(["run", "--suite", "entropy", "--trials", "5", "--tol-dpi", "1e-6", "--out", str(tmp_path)]) == 0
    first = (tmp_path / "report.csv").read_text().splitlines()[0]
    assert first == "# tol-dpi=1e-06"
    assert json.loads((tmp_path / "summary.json").read_text())["tolerance_overrides"] == {"dpi": 1e-6}


def test_config_errors_exit_1(tmp_path, capsys):
    assert cli.main(["run", "--trials", "0", "--out", str(tmp_path)]) == 1
    assert cli.main(["run", "--suite", "nonsense"]) == 1
    assert cli.main(["certify"]) == 1
    assert cli.main(["geodesic", "--in", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["geodesic", "--in", str(bad), "--out", str(tmp_path)]) == 1


def test_certify_depolarizing_demo(tmp_path):
    assert cli.main(["certify", "--demo", "depolarizing", "--n", "3", "--trials", "60", "--out", str(tmp_path)]) == 0
    rows = {r["check"]: r for r in read_rows(tmp_path / "report.csv")}
    for check in ("gradient_estimate", "action_dissipation", "entropy_decay", "lsi", "duality_agreement"):
        assert rows[check]["pass"] == "PASS"
    assert float(rows["gradient_estimate"]["lambda"]) == 0.5
    assert rows["empirical_lambda"]["pass"] == "info"


def test_certify_invariant_failure_exit_2(tmp_path, capsys):
    code = cli.main(["certify", "--demo", "depolarizing", "--n", "2", "--lambda", "3", "--trials", "20",
                     "--out", str(tmp_path)])
    assert code == 2
    assert "invariant failed" in capsys.readouterr().err


def test_certify_thermal_demo(tmp_path):
    assert cli.main(["certify", "--demo", "thermal", "--lambda", "0", "--trials", "20", "--out", str(tmp_path)]) == 0


def test_decompose_round_trip(tmp_path):
    gen = tmp_path / "gen.json"
    sig = tmp_path / "sigma.json"
    gen.write_text(json.dumps(depolarizing_generator(2).to_json()))
    sig.write_text(json.dumps(matrix_to_json(np.eye(2) / 2)))
    assert cli.main(["decompose", "--generator", str(gen), "--sigma", str(sig), "--out", str(tmp_path)]) == 0
    obj = json.loads((tmp_path / "jumps.json").read_text())
    assert obj["verification"]["jumps"] == 3
    assert obj["verification"]["reconstruction_residual"] <= 1e-10
    db = DBGenerator.from_json(obj)
    assert np.max(np.abs(db.superop() - depolarizing_generator(2).L)) <= 1e-8

    src = random_db_generator(3, seed=2)
    gen.write_text(json.dumps(Generator(src.superop()).to_json()))
    sig.write_text(json.dumps(matrix_to_json(src.sigma)))
    assert cli.main(["decompose", "--generator", str(gen), "--sigma", str(sig), "--out", str(tmp_path)]) == 0
    db = DBGenerator.from_json(json.loads((tmp_path / "jumps.json").read_text()))
    assert np.max(np.abs(db.superop() - src.superop())) <= 1e-8


def test_decompose_non_db_diagnostic(tmp_path, capsys):
    gen = tmp_path / "gen.json"
    sig = tmp_path / "sigma.json"
    H = np.array([[0, 1], [1, 0]], complex)
    gen.write_text(json.dumps(Generator(1j * commutator_superop(H)).to_json()))
    sig.write_text(json.dumps(matrix_to_json(np.diag([0.7, 0.3]))))
    assert cli.main(["decompose", "--generator", str(gen), "--sigma", str(sig), "--out", str(tmp_path)]) == 2
    assert "detailed balance residual" in capsys.readouterr().err
    assert not (tmp_path / "jumps.json").exists()


def test_geodesic_command(tmp_path):
    pair = tmp_path / "pair.json"
    pair.write_text(json.dumps({
        "demo": "depolarizing", "n": 2,
        "rho0": matrix_to_json(np.diag([0.8, 0.2])), "rho1": matrix_to_json(np.diag([0.2, 0.8])),
    }))
    assert cli.main(["geodesic", "--in", str(pair), "--m", "32", "--out", str(tmp_path)]) == 0
    rows = {r["check"]: r for r in read_rows(tmp_path / "report.csv")}
    assert rows["self_distance"]["pass"] == "PASS"
    assert float(rows["self_distance"]["worst_slack"]) == pytest.approx(0.0, abs=1e-5)
    assert abs(float(rows["distance"]["worst_slack"]) - 1.2272593889) < 2e-3
    path = json.loads((tmp_path / "path.json").read_text())
    assert path["m"] == 32 and len(path["densities"]) == 33


def test_flow_command(tmp_path):
    assert cli.main(["flow", "--demo", "depolarizing", "--n", "3", "--steps", "10", "--out", str(tmp_path)]) == 0
    with open(tmp_path / "flow.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 11
    D = [float(r["relative_entropy"]) for r in rows]
    assert all(b <= a + 1e-12 for a, b in zip(D, D[1:]))


def test_console_script(tmp_path):
    exe = shutil.which("qms")
    if exe is None:
        pytest.skip("console script not installed")
    proc = subprocess.run([exe, "run", "--suite", "entropy", "--trials", "5", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "PASS" in proc.stdout
