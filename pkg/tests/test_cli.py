import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from orbitns.spectral import TruncatedState, mode_table, random_state, save_state

GOLDEN = Path(__file__).parent / "data" / "diagnostics_n8.csv"


def run_cli(*args: str) -> subprocess.CompletedProcess:
    cmd = [sys.executable, "-m", "orbitns", *args]
    return subprocess.run(cmd, capture_output=True, text=True)


def test_help():
    cp = run_cli("--help")
    assert cp.returncode == 0, cp.stderr
    assert "diagnostics" in cp.stdout


def test_diagnostics_matches_golden_file(tmp_path):
    out = tmp_path / "diag.csv"
    cp = run_cli("diagnostics", "--n-max", "8", "--out", str(out))
    assert cp.returncode == 0, cp.stderr
    assert out.read_bytes() == GOLDEN.read_bytes()


def test_diagnostics_stdout_and_json():
    cp = run_cli("diagnostics", "--n-max", "2")
    assert cp.returncode == 0
    lines = cp.stdout.strip().splitlines()
    assert lines[0] == "N,modes,orbits,shells,max_triad_count,total_triads"
    assert lines[1] == "1,26,3,3,16,264"
    cp = run_cli("diagnostics", "--n-max", "2", "--format", "json")
    recs = json.loads(cp.stdout)
    assert recs[1]["total_triads"] == 6486


def test_diagnostics_range_check():
    assert run_cli("diagnostics", "--n-max", "0").returncode == 1
    assert run_cli("diagnostics", "--n-max", "17").returncode == 1


def test_incidence_table():
    cp = run_cli("incidence", "--n", "1")
    assert cp.returncode == 0, cp.stderr
    rows = [r for r in csv.reader(cp.stdout.splitlines()) if not r[0].startswith("#")]
    assert rows[0] == ["N", "alpha", "beta", "triads"]
    table = {(r[1], r[2]): int(r[3]) for r in rows[1:]}
    assert table[("1,0,0", "1,1,1")] == 24
    assert table[("1,0,0", "1,1,0")] == 48
    assert table[("1,1,1", "1,1,1")] == 0
    # row totals: |alpha| * T(k_alpha, 1)
    assert sum(v for (a, _), v in table.items() if a == "1,0,0") == 6 * 16
    assert cp.stdout.strip().splitlines()[-1].startswith("# N=1 max_row_sqrt_sum=")


def test_incidence_single_row_and_bad_label():
    cp = run_cli("incidence", "--n", "1", "--alpha", "1,1,1")
    assert cp.returncode == 0
    rows = [r for r in csv.reader(cp.stdout.splitlines()) if not r[0].startswith("#")]
    assert len(rows) == 4  # header + one row per source orbit
    cp = run_cli("incidence", "--n", "1", "--alpha", "9,9,9")
    assert cp.returncode == 1
    assert "1,0,0" in cp.stderr  # lists the valid canonicals


@pytest.fixture()
def state_file(tmp_path):
    path = tmp_path / "state.json"
    save_state(random_state(2, 2.0, 1.0, seed=5), path)
    return path


def test_transfer_outputs(tmp_path, state_file):
    prefix = str(tmp_path / "tm")
    cp = run_cli("transfer", "--state", str(state_file), "--out", prefix, "--s", "2.0")
    assert cp.returncode == 0, cp.stderr
    m = _read_matrix(prefix + "_M.csv")
    a = _read_matrix(prefix + "_A.csv")
    v = _read_matrix(prefix + "_V.csv")
    assert m.shape == (9, 9)
    np.testing.assert_array_equal(a, -a.T)
    np.testing.assert_array_equal(v, v.T)
    assert np.abs(a + v - m).max() <= 1e-15 * max(1e-300, np.abs(m).max())
    report = cp.stdout.splitlines()
    assert report[0] == "alpha,row_sum,bound_shape,ratio"
    assert len(report) == 10


def _read_matrix(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    labels = rows[0][1:]
    data = np.array([[float(x) for x in r[1:]] for r in rows[1:]])
    assert [r[0] for r in rows[1:]] == labels
    return data


def test_transfer_rejects_out_of_range_exponent(state_file, tmp_path):
    cp = run_cli(
        "transfer", "--state", str(state_file), "--out", str(tmp_path / "x"), "--s", "1.2"
    )
    assert cp.returncode == 1


def test_transfer_rejects_corrupt_state(tmp_path):
    path = tmp_path / "corrupt.json"
    u = random_state(1, 2.0, 1.0, seed=5)
    doc = json.loads(json.dumps({
        "N": 1,
        "modes": [
            {"k": [int(c) for c in mode_table(1).modes[i]],
             "re": list(u.values[i].real), "im": list(u.values[i].imag)}
            for i in range(26)
        ],
    }))
    doc["modes"][0]["re"] = [float("nan")] * 3
    path.write_text(json.dumps(doc))
    cp = run_cli("transfer", "--state", str(path), "--out", str(tmp_path / "x"))
    assert cp.returncode == 2
    assert "invariant" in cp.stderr

    doc["modes"] = doc["modes"][1:]
    path.write_text(json.dumps(doc))
    cp = run_cli("transfer", "--state", str(path), "--out", str(tmp_path / "x"))
    assert cp.returncode == 2
    assert "missing" in cp.stderr


def test_transfer_byte_deterministic(tmp_path, state_file):
    p1, p2 = str(tmp_path / "a"), str(tmp_path / "b")
    run_cli("transfer", "--state", str(state_file), "--out", p1)
    run_cli("transfer", "--state", str(state_file), "--out", p2)
    assert Path(p1 + "_M.csv").read_bytes() == Path(p2 + "_M.csv").read_bytes()


def test_simulate_zero_state(tmp_path):
    path = tmp_path / "zero.json"
    save_state(TruncatedState.zero(1), path)
    cp = run_cli("simulate", "--state", str(path), "--nu", "0.1", "--steps", "3")
    assert cp.returncode == 0, cp.stderr
    rows = list(csv.reader(cp.stdout.splitlines()))
    assert rows[0][0] == "step"
    assert all(float(r[3]) == 0 and float(r[7]) == 0 for r in rows[1:])


def test_simulate_random_run_and_determinism(tmp_path):
    args = (
        "simulate", "--n", "2", "--seed", "1", "--nu", "0.1",
        "--steps", "10", "--every", "5", "--dt", "1e-3",
    )
    out1, out2 = tmp_path / "r1.csv", tmp_path / "r2.csv"
    cp = run_cli(*args, "--out", str(out1))
    assert cp.returncode == 0, cp.stderr
    cp = run_cli(*args, "--out", str(out2))
    assert cp.returncode == 0
    assert out1.read_bytes() == out2.read_bytes()
    rows = list(csv.reader(out1.read_text().splitlines()))[1:]
    for row in rows:
        assert float(row[7]) <= 1e-10


def test_simulate_residual_tolerance_exit_code():
    cp = run_cli(
        "simulate", "--n", "1", "--seed", "1", "--nu", "0.1",
        "--steps", "2", "--residual-tol", "1e-30",
    )
    assert cp.returncode == 3
    assert "tolerance" in cp.stderr


def test_simulate_divergence_exit_code():
    cp = run_cli(
        "simulate", "--n", "1", "--seed", "2", "--amplitude", "5", "--nu", "5",
        "--dt", "1e6", "--steps", "50",
    )
    assert cp.returncode == 4
    assert "diverged" in cp.stderr


def test_simulate_corrupt_state_rejected_before_stepping(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"N": 1, "modes": []}')
    cp = run_cli("simulate", "--state", str(path), "--steps", "5")
    assert cp.returncode == 2


def test_bounds_small_sweep(tmp_path):
    out = tmp_path / "bounds.csv"
    cp = run_cli(
        "bounds", "--n-max", "2", "--s", "2.0,2.5", "--seeds", "0,1", "--out", str(out)
    )
    assert cp.returncode == 0, cp.stderr
    rows = list(csv.reader(out.read_text().splitlines()))
    assert rows[0] == ["metric", "N", "s", "seed", "value"]
    metrics = {r[0] for r in rows[1:]}
    assert metrics == {"kernel_ratio_max", "rowsum_ratio_max", "max_row_sqrt_sum"}
    assert all(np.isfinite(float(r[4])) for r in rows[1:])


def test_bounds_usage_errors():
    assert run_cli("bounds", "--n-max", "2", "--seeds", "").returncode == 1
    assert run_cli("bounds", "--n-max", "2", "--s", "1.2").returncode == 1
    assert run_cli("bounds").returncode == 1


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n_max": 3, "format": "csv"}))
    cp = run_cli("diagnostics", "--config", str(cfg))
    assert cp.returncode == 0
    assert len(cp.stdout.strip().splitlines()) == 4  # header + 3 rows
    cp = run_cli("diagnostics", "--config", str(cfg), "--n-max", "1")
    assert len(cp.stdout.strip().splitlines()) == 2  # flag wins
