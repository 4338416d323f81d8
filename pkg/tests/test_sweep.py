import json
import math

import pytest

from csbm import cli, sweep as sweepmod
from csbm.model import ParameterError
from csbm.sweep import (COLUMNS, CSV_TAG, SweepConfig, format_csv, read_csv, run_seeds, sweep,
                        worker_count, write_outputs)


def small_cfg(**kw):
    base = dict(n=100, p=80, d=4, lam_range=(0.2, 0.9), lam_count=2, mu_range=(0.3, 1.0), mu_count=2,
                runs=3, t_max=8, workers=1)
    base.update(kw)
    return SweepConfig(**base)


def test_grid_rows_and_runs():
    res = sweep(small_cfg(algorithms=("linbp",)))
    assert len(res.rows) == 4
    assert all(r["n_runs"] == 3 and r["n_errors"] == 0 for r in res.rows)
    assert [(r["lambda"], r["mu"]) for r in res.rows] == [(0.2, 0.3), (0.2, 1.0), (0.9, 0.3), (0.9, 1.0)]


def test_rows_per_algorithm():
    res = sweep(small_cfg(algorithms=("fullbp", "linbp")))
    assert len(res.rows) == 8
    assert [r["algorithm"] for r in res.rows[:2]] == ["fullbp", "linbp"]
    for r in res.rows:
        assert 0 <= r["rejection_rate"] <= 1
        assert 0 <= r["mean_overlap"] <= 1


def test_default_mu_range():
    cfg = SweepConfig(n=100, p=400, d=4, lam_count=2, mu_count=3, runs=1)
    assert cfg.mu_range == (0.0, 0.5)
    assert cfg.mu_values().tolist() == [0.0, 0.25, 0.5]


def test_csv_is_byte_identical(tmp_path):
    a = write_outputs(sweep(small_cfg()), tmp_path / "a")
    b = write_outputs(sweep(small_cfg()), tmp_path / "b")
    for pa, pb in zip(a, b):
        assert pa.read_bytes() == pb.read_bytes()


def test_parallel_matches_inline(tmp_path):
    inline = format_csv(sweep(small_cfg(workers=1)).rows)
    pooled = format_csv(sweep(small_cfg(workers=2)).rows)
    assert inline == pooled


def test_seeds_unique_and_stable():
    cfg = small_cfg(lam_count=5, mu_count=5, runs=10)
    seeds = run_seeds(cfg)
    assert len(seeds) == 250
    assert len(set(seeds.values())) == 250
    assert run_seeds(cfg) == seeds
    assert run_seeds(small_cfg(lam_count=5, mu_count=5, runs=10, base_seed=1)) != seeds


def test_seed_collision_detected(monkeypatch):
    monkeypatch.setattr(sweepmod, "derive_seed", lambda *a: 7)
    with pytest.raises(RuntimeError, match="not unique"):
        run_seeds(small_cfg())


def test_failed_run_is_isolated(monkeypatch):
    real = sweepmod.linbp_run
    bad_seed = run_seeds(small_cfg())[(1, 2)]

    def flaky(inst, t_max, init_scale, seed, **kw):
        if seed == bad_seed:
            raise FloatingPointError("boom")
        return real(inst, t_max, init_scale, seed, **kw)

    monkeypatch.setattr(sweepmod, "linbp_run", flaky)
    res = sweep(small_cfg(algorithms=("linbp",)))
    assert res.n_errors == 1
    row = res.rows[1]
    assert row["n_runs"] == 2 and row["n_errors"] == 1
    assert "FloatingPointError: boom" in row["error"]
    assert all(r["n_errors"] == 0 for i, r in enumerate(res.rows) if i != 1)


def test_cli_exit_code_on_failed_runs(monkeypatch, tmp_path, capsys):
    def broken(*a, **kw):
        raise RuntimeError("always")

    monkeypatch.setattr(sweepmod, "linbp_run", broken)
    code = cli.main(["sweep", "--n", "100", "--p", "80", "--d", "4", "--lam-count", "1", "--mu-count", "1",
                     "--runs", "2", "--alg", "linbp", "--tmax", "3", "--workers", "1",
                     "--out-dir", str(tmp_path)])
    assert code == 3
    assert "2 failed runs" in capsys.readouterr().err
    rows = read_csv(tmp_path / "sweep.csv")
    assert rows[0]["n_errors"] == 2 and math.isnan(rows[0]["rejection_rate"])


def test_csv_roundtrip_and_schema(tmp_path):
    csv_path, manifest = write_outputs(sweep(small_cfg()), tmp_path)
    text = csv_path.read_text().splitlines()
    assert text[0] == CSV_TAG
    assert text[1] == ",".join(COLUMNS)
    rows = read_csv(csv_path)
    assert len(rows) == 8
    meta = json.loads(manifest.read_text())
    assert meta["n_rows"] == 8 and meta["n_cells"] == 4
    assert "workers" not in meta["config"]
    assert SweepConfig.from_dict(meta["config"]).to_dict() == meta["config"]


def test_read_csv_rejects_foreign_files(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError, match="schema header"):
        read_csv(p)
    p.write_text(CSV_TAG + "\na,b\n1,2\n")
    with pytest.raises(ValueError, match="column mismatch"):
        read_csv(p)


def test_worker_count_env(monkeypatch):
    cfg = small_cfg(workers=None)
    monkeypatch.setenv("CSBM_THREADS", "1")
    assert worker_count(cfg) == 1
    monkeypatch.setenv("CSBM_THREADS", "many")
    with pytest.raises(ParameterError):
        worker_count(cfg)
    monkeypatch.delenv("CSBM_THREADS")
    assert worker_count(cfg) >= 1
    assert worker_count(small_cfg(workers=3)) == 3


@pytest.mark.parametrize("kw, match", [
    (dict(runs=0), "runs"),
    (dict(lam_count=0), "grid counts"),
    (dict(lam_range=(-0.1, 1.0)), "non-negative"),
    (dict(lam_range=(0.0, 3.0)), "sqrt"),
    (dict(algorithms=("magic",)), "unknown algorithms"),
    (dict(model="gaussian", algorithms=("linbp",)), "spectral"),
    (dict(model="lattice"), "unknown model"),
])
def test_config_validation(kw, match):
    with pytest.raises(ParameterError, match=match):
        small_cfg(**kw)


def test_from_dict_rejects_unknown_keys():
    with pytest.raises(ParameterError, match="unknown"):
        SweepConfig.from_dict({"n": 100, "colour": "red"})


def test_gaussian_spectral_sweep():
    cfg = small_cfg(model="gaussian", d=1, algorithms=("spectral",), lam_range=(0.0, 1.5),
                    mu_range=(0.0, 1.0), runs=2)
    res = sweep(cfg)
    assert res.n_errors == 0
    assert len(res.rows) == 4
