import csv
import io
import json

import numpy as np
import pytest
from click.testing import CliRunner

from kncs import cli
from kncs.errors import DegenerateNullspace, ZeroMeanOccupation


@pytest.fixture
def runner():
    return CliRunner()


def run(runner, *args, **kw):
    return runner.invoke(cli.main, [str(a) for a in args], **kw)


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_help_lists_every_command(runner):
    out = run(runner, "--help").output
    for name in ("coeffs", "distribution", "mixed", "phase-diagram", "mandel-sweep",
                 "squeeze-sweep", "dark-state", "overlap", "decompose"):
        assert name in out


def test_coeffs_converging_case_decays(runner):
    r = run(runner, "coeffs", "--K", 1, "--j", 0, "--eta", 0.5, "--xi-mag", 1.2)
    assert r.exit_code == 0, r.output
    data = rows(r.output)
    assert len(data) == 500
    assert data[0]["schema_version"] == "1"
    y = np.array([float(d["log_g2"]) for d in data])
    n = np.array([int(d["n"]) for d in data])
    # the Laguerre factor makes the tail ragged, so check the trend and the envelope
    slope = np.polyfit(n[250:], y[250:], 1)[0]
    assert slope < 0
    assert y[400:].max() < y[100:200].min()


def test_coeffs_json_carries_verdict(runner):
    r = run(runner, "coeffs", "--eta", 0.5, "--xi-mag", 3.2, "--n-max", 20, "--format", "json")
    doc = json.loads(r.output)
    assert doc["schema_version"] == 1 and doc["command"] == "coeffs"
    assert doc["params"]["xi_mag"] == 3.2
    assert len(doc["data"]) == 20
    assert doc["summary"]["exists"] is False


def test_distribution_lattice_rows(runner):
    r = run(runner, "distribution", "--K", 3, "--j", 2, "--eta", 0.05, "--xi-mag", 100)
    assert r.exit_code == 0, r.output
    n = [int(d["n"]) for d in rows(r.output)]
    assert n[:4] == [2, 5, 8, 11]
    assert all(k % 3 == 2 for k in n)
    assert sum(float(d["P"]) for d in rows(r.output)) == pytest.approx(1.0, abs=1e-12)


def test_mandel_sweep_example(runner):
    r = run(runner, "mandel-sweep", "--K", 1, "--j", 0, "--eta", 0.05, "--xi-max", 5,
            "--points", 64)
    assert r.exit_code == 0, r.output
    m = np.array([float(d["mandel"]) for d in rows(r.output)])
    assert len(m) == 64
    assert np.all(m < 1) and np.all(np.diff(m) < 0)


def test_squeeze_sweep_columns(runner):
    r = run(runner, "squeeze-sweep", "--K", 2, "--eta", 0.05, "--xi-phase", 3.141592653589793,
            "--xi-max", 2, "--points", 8)
    assert r.exit_code == 0, r.output
    data = rows(r.output)
    assert list(data[0]) == ["schema_version", "xi_mag", "mandel", "squeeze_S", "mean_n",
                             "variance_x"]
    assert [float(d["xi_mag"]) for d in data] == pytest.approx(np.arange(1, 9) / 4)


def test_mixed_command(runner):
    r = run(runner, "mixed", "--K", 2, "--eta", 0.3, "--xi-mag", 1.5, "--alpha-mag", 1.0,
            "--format", "json")
    assert r.exit_code == 0, r.output
    doc = json.loads(r.output)
    assert sum(doc["summary"]["beta"][k] ** 2 for k in range(2)) == pytest.approx(1.0)
    assert doc["summary"]["total"] == pytest.approx(1.0, abs=1e-12)


def test_phase_diagram_command(runner):
    r = run(runner, "phase-diagram", "--K", 1, "--eta-min", 0.5, "--eta-max", 1.0,
            "--points", 2, "--format", "json")
    assert r.exit_code == 0, r.output
    doc = json.loads(r.output)
    assert [d["eta"] for d in doc["data"]] == [0.5]
    assert doc["data"][0]["xi_critical"] == pytest.approx(2.0, rel=1e-3)
    assert [g[0] for g in doc["summary"]["gaps"]] == [1.0]


def test_dark_state_command(runner):
    r = run(runner, "dark-state", "--K", 2, "--j", 1, "--eta", 0.3, "--xi-mag", 2.0,
            "--format", "json")
    assert r.exit_code == 0, r.output
    s = json.loads(r.output)["summary"]
    assert 1 - s["overlap_abs"] < 1e-12
    assert s["residual"] < 1e-12
    assert s["omega0"] == pytest.approx(2.0 * 0.09)


def test_overlap_command(runner):
    r = run(runner, "overlap", "--eta", 0.5, "--xi-mag", 1.0, "--xi2-mag", 1.5,
            "--xi2-phase", 0.4)
    assert r.exit_code == 0, r.output
    (d,) = rows(r.output)
    assert float(d["abs_diff"]) < 1e-10


def test_decompose_command(runner):
    r = run(runner, "decompose", "--K", 3, "--j", 1, "--eta", 0.3, "--xi-mag", 4.0,
            "--format", "json")
    assert r.exit_code == 0, r.output
    doc = json.loads(r.output)
    assert len(doc["data"]) == 3
    assert doc["summary"]["roundtrip_max_error"] < 1e-9


def test_identity_and_tabulated_kinds(runner, tmp_path):
    r = run(runner, "distribution", "--f-kind", "identity", "--xi-mag", 1.0)
    assert r.exit_code == 0
    assert float(rows(r.output)[0]["P"]) == pytest.approx(np.exp(-1.0))
    table = tmp_path / "f.txt"
    table.write_text(",".join(["1.0"] * 300))
    r = run(runner, "distribution", "--f-kind", "tabulated", "--f-table", table,
            "--xi-mag", 1.0)
    assert r.exit_code == 0, r.output
    assert float(rows(r.output)[0]["P"]) == pytest.approx(np.exp(-1.0))


# -- exit codes --------------------------------------------------------------------

@pytest.mark.parametrize("args", [
    ("distribution", "--K", 2, "--j", 2, "--eta", 0.3),
    ("distribution", "--K", 1),
    ("distribution", "--f-kind", "tabulated"),
    ("mandel-sweep", "--eta", 0.3),
    ("phase-diagram", "--eta-min", 0.8, "--eta-max", 0.2),
    ("distribution", "--eta", 0.3, "--bogus", 1),
])
def test_usage_errors_exit_2(runner, args):
    assert run(runner, *args).exit_code == 2


@pytest.mark.parametrize("args", [
    ("distribution", "--eta", 0.5, "--xi-mag", 3.2),
    ("distribution", "--eta", 0.5, "--xi-mag", 2.0),
    ("dark-state", "--eta", 0.5, "--xi-mag", 3.2),
])
def test_nonexistent_exit_3(runner, args):
    r = run(runner, *args)
    assert r.exit_code == 3
    assert r.stderr.startswith("error:")


@pytest.mark.parametrize("exc", [DegenerateNullspace("forced"), OverflowError("forced")])
def test_numerical_failure_exit_4(runner, monkeypatch, exc):
    def boom(*a, **k):
        raise exc
    monkeypatch.setattr(cli.ion, "cross_validate", boom)
    r = run(runner, "dark-state", "--eta", 0.3, "--xi-mag", 1.0)
    assert r.exit_code == 4
    assert "forced" in r.stderr


def test_zero_mean_occupation_exit_4(runner, monkeypatch):
    def boom(*a, **k):
        raise ZeroMeanOccupation("forced")
    monkeypatch.setattr(cli.observables, "statistics_sweep", boom)
    r = run(runner, "mandel-sweep", "--eta", 0.3, "--xi-max", 1)
    assert r.exit_code == 4


# -- output plumbing -----------------------------------------------------------------

def test_output_file_and_sidecar(runner, tmp_path):
    out = tmp_path / "sub" / "d.csv"
    r = run(runner, "distribution", "--eta", 0.3, "--xi-mag", 1.0, "-o", out)
    assert r.exit_code == 0
    assert out.exists()
    side = out.with_name("d.csv.columns.txt").read_text()
    assert "schema_version" in side and "probability" in side


def test_output_dir_environment(runner, tmp_path):
    r = run(runner, "overlap", "--eta", 0.3, "--xi2-mag", 1.0, "--format", "json",
            env={cli.OUTPUT_DIR_ENV: str(tmp_path)})
    assert r.exit_code == 0
    doc = json.loads((tmp_path / "overlap.json").read_text())
    assert doc["command"] == "overlap"
    assert (tmp_path / "overlap.json.columns.txt").exists()


def test_output_is_deterministic(runner, tmp_path):
    args = ("mandel-sweep", "--K", 2, "--eta", 0.1, "--xi-max", 3, "--points", 16)
    a = run(runner, *args).output
    b = run(runner, *args).output
    c = run(runner, *args, "--workers", 2).output
    assert a == b == c


def test_json_non_finite_values_are_strings(runner):
    r = run(runner, "coeffs", "--eta", 1.0, "--n-max", 5, "--format", "json")
    doc = json.loads(r.output)
    assert r.exit_code == 0
    assert any(isinstance(d["log_g2"], str) for d in doc["data"])
