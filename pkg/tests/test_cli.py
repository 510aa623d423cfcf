"""Command-line contract: output format, determinism, exit codes."""
import csv
import io
import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from symstab.cli import COLUMNS, main


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def _csv_rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_counterexample_csv_header(capsys):
    code, out, _ = run(["counterexample"], capsys)
    assert code == 0
    assert out.splitlines()[0] == ",".join(COLUMNS)
    rows = _csv_rows(out)
    F = next(r for r in rows if r["label"] == "ball r=2.4" and r["quantity"] == "F")
    assert abs(float(F["value"]) - 0.0522732) < 1e-6
    assert F["provenance"] == "closed_form"


@pytest.mark.parametrize("argv", [
    ["counterexample"],
    ["phase-scan", "--dim", "2"],
    ["asymptotics"],
    ["optimize-1d", "--measure", "0.3", "--rho", "0.05", "--grid", "10"],
    ["stability", "--set", "ball n=2 r=1.3", "--set", "strip n=2 w=0.6", "--rho", "0.2",
     "--samples", "20000", "--seed", "4"],
    ["functional", "--set", "ellipse a=2.5 b=2.31394"],
    ["variation", "--dim", "2", "--radius", "1.5", "--rho", "0.1"],
])
def test_deterministic_and_json_parity(argv, capsys):
    c1, a, _ = run(argv, capsys)
    c2, b, _ = run(argv, capsys)
    assert c1 == c2 == 0
    assert a == b
    c3, j, _ = run(argv + ["--format", "json"], capsys)
    assert c3 == 0
    payload = json.loads(j)
    rows = _csv_rows(a)
    assert len(payload) == len(rows)
    for pr, cr in zip(payload, rows):
        assert pr["label"] == cr["label"] and pr["quantity"] == cr["quantity"]
        assert pr["status"] == cr["status"] and pr["provenance"] == cr["provenance"]
        if isinstance(pr["value"], float):
            assert float(cr["value"]) == pr["value"]  # 17 digits round-trip exactly
        else:
            assert str(pr["value"]).lower() == cr["value"].lower()


def test_out_file(tmp_path, capsys):
    p = tmp_path / "o.csv"
    assert main(["asymptotics", "--dim", "100", "--out", str(p)]) == 0
    assert capsys.readouterr().out == ""
    assert p.read_text().startswith("label,quantity")


@pytest.mark.parametrize("argv", [
    ["bogus"],
    ["optimize-1d", "--measure", "0.33", "--rho", "0.05", "--grid", "10"],
    ["optimize-1d", "--measure", "0.3"],
    ["stability", "--rho", "0.2"],
    ["stability", "--set", "blob", "--rho", "0.2"],
    ["variation", "--dim", "5", "--radius", "1.0", "--rho", "0.1"],
    ["counterexample", "--rho", "1.5"],
    ["functional", "--set", "star file=/nonexistent.csv"],
])
def test_bad_config_exit_2(argv, capsys):
    code, _, _ = run(argv, capsys)
    assert code == 2


def test_validate_exit_codes(capsys):
    code, out, _ = run(["validate", "--samples", "20000"], capsys)
    assert code == 0
    code, out, _ = run(["validate", "--samples", "20000", "--tol", "1e-15"], capsys)
    assert code == 1
    failed = [r for r in _csv_rows(out) if r["status"] == "fail"]
    assert failed and all(float(r["value"]) > float(r["error"]) for r in failed)


def test_stability_rows_agree(capsys):
    code, out, _ = run(["stability", "--set", "intervals [-1,1]", "--rho", "-0.2",
                        "--samples", "200000"], capsys)
    rows = _csv_rows(out)
    s, m = float(rows[0]["value"]), float(rows[1]["value"])
    assert abs(s - m) < 4 * float(rows[1]["error"])


def test_variation_high_dim_closed_form(capsys):
    code, out, _ = run(["variation", "--dim", "6", "--radius", "3.0"], capsys)
    rows = _csv_rows(out)
    assert code == 0
    assert rows[0]["provenance"] == "closed_form"
    assert rows[2]["value"] == "not_locally_max"  # 9 > 6 + 2


@pytest.mark.skipif(shutil.which("symstab") is None, reason="console script not installed")
def test_console_script():
    proc = subprocess.run(["symstab", "phase-scan", "--dim", "2", "--radius", "2.0"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "boundary" in proc.stdout


def test_module_entry():
    proc = subprocess.run([sys.executable, "-m", "symstab.cli", "asymptotics", "--format", "json"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    vals = [r["value"] for r in json.loads(proc.stdout) if r["quantity"] == "F_exact"]
    assert np.all(np.isfinite(vals))
