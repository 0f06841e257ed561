import json
import math
import subprocess
import sys

import pytest

from fkmatch.cli import run


def _out(capsys):
    captured = capsys.readouterr()
    return captured.out, captured.err


def test_laplace_standard_besq(capsys):
    assert run(["laplace", "--process", "gbesq1", "--x", "1", "--delta", "2", "--t", "1", "--lambda", "1"]) == 0
    out, _ = _out(capsys)
    assert float(out.strip()) == pytest.approx(math.exp(-1 / 3) / 3, rel=1e-14)
    assert out.strip().startswith("0.238843")


def test_joint_at_time_zero(capsys):
    argv = ["joint", "--process", "srou", "--x", "1", "--delta", "2", "--alpha", "1",
            "--t", "0", "--lambda", "2", "--gamma", "5"]
    assert run(argv) == 0
    out, _ = _out(capsys)
    assert float(out.strip()) == pytest.approx(math.exp(-2.0), rel=1e-14)


def test_expression_dimension(capsys):
    assert run(["laplace", "--process", "gbesq2", "--x", "1", "--delta", "1 + t", "--theta", "-1",
                "--t", "0.5", "--lambda", "1"]) == 0
    out, _ = _out(capsys)
    assert 0 < float(out) < 1


def test_usage_errors(capsys):
    assert run([]) == 2
    assert run(["laplace", "--process", "nope"]) == 2
    assert run(["laplace", "--process", "gbesq1", "--x", "1", "--delta", "2", "--t", "1"]) == 2
    assert run(["laplace", "--process", "gbesq1", "--x", "1", "--delta", "2 +", "--t", "1", "--lambda", "1"]) == 2


def test_domain_error_is_usage(capsys):
    assert run(["laplace", "--process", "gbesq1", "--x", "-1", "--delta", "2", "--t", "1", "--lambda", "1"]) == 2


def test_json_errors(capsys):
    code = run(["laplace", "--process", "gbesq1", "--x", "1", "--delta", "-2", "--t", "1",
                "--lambda", "1", "--json-errors"])
    assert code == 2
    _, err = _out(capsys)
    payload = json.loads(err.strip().splitlines()[-1])
    assert payload["exit_code"] == 2 and payload["error"] == "DomainError"


def test_numerical_error_exit_code(capsys, monkeypatch):
    monkeypatch.setenv("FKMATCH_BUDGET", "10")
    code = run(["simulate", "--process", "gbesq1", "--x", "1", "--delta", "2", "--t", "1",
                "--lambda", "1", "--paths", "100", "--dt", "0.01"])
    assert code == 3


def test_parameter_region_is_usage(capsys):
    assert run(["verify", "--identity", "jacobi_up", "--b", "0.1"]) == 2


def test_config_file_and_override(tmp_path, capsys):
    cfg = {
        "command": "laplace",
        "process": {"family": "gbesq1", "x": 1.0, "delta": "2"},
        "query": {"t": 1.0, "lambda": 1.0},
    }
    path = tmp_path / "run.json"
    path.write_text(json.dumps(cfg))
    assert run(["laplace", "--config", str(path)]) == 0
    first, _ = _out(capsys)
    assert run(["laplace", "--config", str(path), "--lambda", "0"]) == 0
    second, _ = _out(capsys)
    assert float(first) == pytest.approx(math.exp(-1 / 3) / 3) and float(second) == 1.0


def test_config_rejects_unknown_keys(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"command": "laplace", "process": {"family": "gbesq1", "colour": 3}}))
    assert run(["laplace", "--config", str(path)]) == 2
    path.write_text("{not json")
    assert run(["laplace", "--config", str(path)]) == 2


def test_verify_report_deterministic(tmp_path, capsys):
    reports = []
    for i in range(2):
        out = tmp_path / f"r{i}.json"
        code = run(["verify", "--identity", "hbp_cosh", "--paths", "5000", "--dt", "0.01",
                    "--seed", "42", "--out", str(out)])
        assert code in (0, 1)
        reports.append(json.loads(out.read_text()))
    for r in reports:
        r.pop("metadata")
    assert reports[0] == reports[1]
    rep = reports[0]
    assert set(rep) == {"schema_version", "command", "config", "results", "ledger"}
    assert rep["results"][0]["id"] == "HBP_COSH"


def test_verify_ledger_section(tmp_path, capsys):
    out = tmp_path / "ledger.json"
    code = run(["verify", "--identity", "srou_discrepancy", "--paths", "4000", "--dt", "0.01", "--out", str(out)])
    assert code == 0
    rep = json.loads(out.read_text())
    assert rep["results"] == [] and rep["ledger"][0]["verdict"] == "ledger"
    assert "winner" in rep["ledger"][0]["evidence"]


def test_csv_output(tmp_path, capsys):
    out = tmp_path / "v.csv"
    assert run(["joint", "--process", "gbesq1", "--x", "1", "--delta", "2", "--t", "1", "--lambda", "1",
                "--gamma", "1", "--format", "csv", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("section,") and len(lines) == 2


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "fkmatch.cli", "laplace", "--process", "bridge", "--x", "1",
                           "--delta", "2", "--t", "1", "--lambda", "1"], capture_output=True, text=True)
    assert proc.returncode == 0 and float(proc.stdout) == pytest.approx(1.0)
