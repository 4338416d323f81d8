import csv
import json
import subprocess
import sys

import pytest

from csbm import cli, io
from csbm.model import derive_params, sample_contextual


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture
def inst_path(tmp_path):
    path = tmp_path / "inst.json"
    assert run("generate", "--n", 150, "--p", 120, "--lambda", 0.9, "--mu", 0.8, "--seed", 4, "--out", path) == 0
    return path


def test_generate_matches_library(inst_path):
    inst = io.load(inst_path)
    ref = sample_contextual(derive_params(150, 120, 5, 0.9, 0.8), 4)
    assert (inst.graph.edges == ref.graph.edges).all()
    assert (inst.covariates == ref.covariates).all()


def test_generate_bin_roundtrip(tmp_path):
    a, b = tmp_path / "a.bin", tmp_path / "b.json"
    assert run("generate", "--n", 90, "--p", 70, "--format", "bin", "--out", a) == 0
    assert run("generate", "--n", 90, "--p", 70, "--out", b) == 0
    assert io.to_bytes(io.load(a)) == io.to_bytes(io.load(b))


def test_generate_needs_out(capsys):
    assert run("generate") == 2
    assert "needs --out" in capsys.readouterr().err


@pytest.mark.parametrize("alg", ["linbp", "fullbp"])
def test_run_bp(alg, inst_path, tmp_path):
    out, trace = tmp_path / "r.json", tmp_path / "t.csv"
    assert run("run", "--instance", inst_path, "--alg", alg, "--tmax", 6, "--trace", trace, "--out", out) == 0
    doc = json.loads(out.read_text())
    assert doc["algorithm"] == alg
    assert doc["decision"] in ("accept", "reject")
    assert 0 <= doc["overlap"] <= 1
    rows = list(csv.reader(trace.read_text().splitlines()))
    assert rows[0] == list(cli.TRACE_COLUMNS)
    assert len(rows) == 8


def test_run_instance_equals_sampling(inst_path, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run("run", "--instance", inst_path, "--tmax", 5, "--seed", 4, "--out", a) == 0
    assert run("run", "--n", 150, "--p", 120, "--lambda", 0.9, "--mu", 0.8, "--tmax", 5, "--seed", 4,
               "--out", b) == 0
    assert a.read_bytes() == b.read_bytes()


def test_run_spectral_gaussian(tmp_path):
    out = tmp_path / "s.json"
    assert run("run", "--model", "gaussian", "--alg", "spectral", "--n", 150, "--p", 120, "--d", 1,
               "--lambda", 1.2, "--mu", 1.0, "--out", out) == 0
    doc = json.loads(out.read_text())
    assert doc["extra"]["path"] == "spectral"
    assert doc["extra"]["threshold"] > 0
    assert "experimental" not in doc["extra"]


def test_run_spectral_on_graph_is_flagged(inst_path, tmp_path):
    out = tmp_path / "s.json"
    assert run("run", "--instance", inst_path, "--alg", "spectral", "--out", out) == 0
    assert json.loads(out.read_text())["extra"]["experimental"] is True


def test_bp_on_gaussian_rejected(capsys):
    assert run("run", "--model", "gaussian", "--n", 50, "--p", 40, "--d", 1, "--alg", "linbp") == 2
    assert "graph instance" in capsys.readouterr().err


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"lambda": 0.5, "mu": 0.5, "gamma": 1.0}))
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run("theory", "--config", cfg, "--out", a) == 0
    assert run("theory", "--config", cfg, "--lambda", 1.0, "--out", b) == 0
    assert json.loads(a.read_text())["threshold"] is False
    assert json.loads(b.read_text())["threshold"] is True


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"lambda": 0.5, "colour": 1}))
    assert run("theory", "--config", cfg) == 2
    assert "unknown config keys" in capsys.readouterr().err


def test_bad_config_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text("[1, 2")
    assert run("theory", "--config", cfg) == 2
    assert run("theory", "--config", tmp_path / "missing.json") == 2


def test_argparse_errors_give_2(capsys):
    assert run("run", "--alg", "magic") == 2
    assert run("nonsense") == 2
    capsys.readouterr()


def test_invalid_parameters_give_2(capsys):
    assert run("run", "--lambda", 5.0, "--d", 4) == 2
    assert run("theory", "--gamma", -1) == 2
    assert run("run", "--model", "gaussian", "--alg", "spectral", "--n", 40, "--p", 30, "--d", 1,
               "--delta", -1) == 2
    capsys.readouterr()


def test_de_csv(tmp_path):
    out = tmp_path / "de.csv"
    assert run("de", "--pool", 2000, "--tmax", 3, "--out", out) == 0
    rows = list(csv.reader(out.read_text().splitlines()))
    assert rows[0] == ["step", "m1", "m2", "m3", "m4", "m1/sqrt(m3)"]
    assert [r[0] for r in rows[1:]] == ["0", "1", "2", "3"]


def test_theory_json(tmp_path):
    out = tmp_path / "t.json"
    assert run("theory", "--lambda", 0.8, "--mu", 0.8, "--gamma", 0.8, "--out", out) == 0
    doc = json.loads(out.read_text())
    assert doc["threshold"] is True
    assert doc["jacobian_radius"] == pytest.approx(1.2699474, abs=1e-7)
    assert doc["predicted_opt"] > doc["null_value"]


def test_theory_lambda_zero_needs_b(capsys):
    assert run("theory", "--lambda", 0.0) == 2
    capsys.readouterr()


def test_sweep_and_report(tmp_path, capsys):
    out = tmp_path / "sw"
    assert run("sweep", "--n", 100, "--p", 80, "--d", 4, "--lam-count", 2, "--mu-count", 2, "--runs", 2,
               "--tmax", 5, "--alg", "linbp", "--workers", 1, "--out-dir", out) == 0
    assert (out / "sweep.csv").exists() and (out / "manifest.json").exists()
    assert run("report", out / "sweep.csv", "--out-dir", tmp_path / "rep") == 0
    assert (tmp_path / "rep" / "summary.md").exists()
    capsys.readouterr()


def test_report_needs_csv(capsys):
    assert run("report") == 2
    capsys.readouterr()


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "csbm", "--version"], capture_output=True, text=True)
    assert res.returncode == 0
    assert res.stdout.startswith("csbm ")
