"""Phase-diagram sweeps over a (lambda, mu) grid.

Each (cell, run) pair samples one instance with the seed
``derive_seed(base_seed, cell, run)`` and runs every requested algorithm on
it.  Runs are independent, so cells can be farmed out to worker processes
without changing any output bit.  A failing run is recorded in its row and
the sweep carries on.
"""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .fullbp import fullbp_run, make_config
from .linbp import linbp_run
from .metrics import covariate_overlap, overlap
from .model import ParameterError, derive_params, sample_contextual, sample_gaussian
from .rng import derive_seed
from .spectral import minimize_xi, spectral_decision

CSV_TAG = "# csbm-sweep v1"
ALGORITHMS = ("linbp", "fullbp", "spectral")
COLUMNS = (
    "lambda", "mu", "algorithm", "rejection_rate", "mean_overlap", "mean_cov_overlap",
    "n_runs", "rejection_stderr", "overlap_stderr", "cov_overlap_stderr", "n_errors", "error",
)


@dataclass
class SweepConfig:
    n: int = 800
    p: int = 1000
    d: float = 5.0
    lam_range: tuple = (0.0, 1.0)
    lam_count: int = 11
    mu_range: tuple | None = None  # default [0, sqrt(gamma)]
    mu_count: int = 11
    runs: int = 20
    algorithms: tuple = ("fullbp", "linbp")
    t_max: int = 50
    init_scale: float = 0.01
    base_seed: int = 0
    model: str = "sbm"
    delta: float = 0.05
    out_dir: str = "sweep_out"
    workers: int | None = None

    def __post_init__(self):
        self.lam_range = tuple(float(x) for x in self.lam_range)
        if self.mu_range is None:
            self.mu_range = (0.0, math.sqrt(self.n / self.p))
        self.mu_range = tuple(float(x) for x in self.mu_range)
        self.algorithms = tuple(self.algorithms)
        self.validate()

    def validate(self) -> None:
        if self.runs < 1:
            raise ParameterError("runs must be >= 1")
        if self.lam_count < 1 or self.mu_count < 1:
            raise ParameterError("grid counts must be >= 1")
        if len(self.lam_range) != 2 or len(self.mu_range) != 2:
            raise ParameterError("ranges must be (lo, hi) pairs")
        if min(self.lam_range) < 0 or min(self.mu_range) < 0:
            raise ParameterError("grid bounds must be non-negative")
        if self.model not in ("sbm", "gaussian"):
            raise ParameterError(f"unknown model {self.model!r}")
        if self.model == "sbm" and max(self.lam_range) > math.sqrt(self.d):
            raise ParameterError(f"lambda range exceeds sqrt(d) = {math.sqrt(self.d):.6g}")
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad or not self.algorithms:
            raise ParameterError(f"unknown algorithms {bad}; choose from {ALGORITHMS}")
        if self.model == "gaussian" and set(self.algorithms) != {"spectral"}:
            raise ParameterError("the Gaussian model only supports the spectral algorithm")
        for lam in self.lam_values():
            derive_params(self.n, self.p, self.d, lam, 0.0, check_graph=self.model == "sbm")

    @property
    def gamma(self) -> float:
        return self.n / self.p

    def lam_values(self) -> np.ndarray:
        return np.linspace(*self.lam_range, self.lam_count)

    def mu_values(self) -> np.ndarray:
        return np.linspace(*self.mu_range, self.mu_count)

    def cells(self) -> list:
        """``(cell_index, lambda, mu)`` in lambda-major order."""
        return [(i * self.mu_count + j, float(lam), float(mu))
                for i, lam in enumerate(self.lam_values())
                for j, mu in enumerate(self.mu_values())]

    def to_dict(self) -> dict:
        out = asdict(self)
        out["lam_range"] = list(self.lam_range)
        out["mu_range"] = list(self.mu_range)
        out["algorithms"] = list(self.algorithms)
        out.pop("workers")
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "SweepConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ParameterError(f"unknown sweep config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass
class SweepResult:
    rows: list
    config: SweepConfig
    seeds: dict = field(default_factory=dict)

    @property
    def n_errors(self) -> int:
        return sum(r["n_errors"] for r in self.rows)


def run_seeds(cfg: SweepConfig) -> dict:
    """Per-run seeds keyed by ``(cell, run)``; raises if two pairs collide."""
    seeds = {(c, r): derive_seed(cfg.base_seed, c, r)
             for c, _, _ in cfg.cells() for r in range(cfg.runs)}
    if len(set(seeds.values())) != len(seeds):
        raise RuntimeError("derived run seeds are not unique")
    return seeds


def _one_run(cfg: SweepConfig, lam: float, mu: float, seed: int) -> dict:
    """Results per algorithm: ``(reject, overlap, cov_overlap)`` or an error string."""
    out = {}
    try:
        params = derive_params(cfg.n, cfg.p, cfg.d, lam, mu, check_graph=cfg.model == "sbm")
        inst = (sample_contextual if cfg.model == "sbm" else sample_gaussian)(params, seed)
    except Exception as exc:  # noqa: BLE001 - isolate per-run failures
        return {a: f"{type(exc).__name__}: {exc}" for a in cfg.algorithms}
    for alg in cfg.algorithms:
        try:
            if alg == "linbp":
                res = linbp_run(inst, cfg.t_max, cfg.init_scale, seed)
            elif alg == "fullbp":
                res = fullbp_run(inst, make_config(params, cfg.t_max, cfg.init_scale), seed)
            else:
                res = None
            if res is not None:
                cov = res.trace[-1]["cov_overlap"]
                out[alg] = (bool(res.reject), overlap(res.v_hat, inst.truth.v), cov)
            else:
                sres = minimize_xi(inst, lam, mu, params.gamma, seed=seed)
                u_hat = inst.covariates @ sres.v_hat
                cov = covariate_overlap(u_hat, inst.truth.u) if np.any(u_hat) else float("nan")
                dec = spectral_decision(sres, lam, mu, params.gamma, cfg.delta)
                out[alg] = (bool(dec), overlap(sres.v_hat, inst.truth.v), cov)
        except Exception as exc:  # noqa: BLE001
            out[alg] = f"{type(exc).__name__}: {exc}"
    return out


def _run_cell(args) -> list:
    cfg_dict, lam, mu, seeds = args
    cfg = SweepConfig.from_dict(cfg_dict)
    return [_one_run(cfg, lam, mu, s) for s in seeds]


def _nan_stats(x: list) -> tuple:
    a = np.asarray(x, dtype=np.float64)
    a = a[~np.isnan(a)]
    if a.size == 0:
        return float("nan"), float("nan")
    se = float(a.std(ddof=1) / math.sqrt(a.size)) if a.size > 1 else float("nan")
    return float(a.mean()), se


def _aggregate(lam: float, mu: float, alg: str, results: list) -> dict:
    ok = [r[alg] for r in results if not isinstance(r[alg], str)]
    errors = [r[alg] for r in results if isinstance(r[alg], str)]
    k = len(ok)
    if k:
        rate = sum(r[0] for r in ok) / k
        rate_se = math.sqrt(rate * (1 - rate) / k)
    else:
        rate = rate_se = float("nan")
    ov, ov_se = _nan_stats([r[1] for r in ok])
    cv, cv_se = _nan_stats([r[2] for r in ok])
    return {
        "lambda": lam, "mu": mu, "algorithm": alg, "rejection_rate": rate,
        "mean_overlap": ov, "mean_cov_overlap": cv, "n_runs": k,
        "rejection_stderr": rate_se, "overlap_stderr": ov_se, "cov_overlap_stderr": cv_se,
        "n_errors": len(errors), "error": errors[0] if errors else "",
    }


def worker_count(cfg: SweepConfig) -> int:
    if cfg.workers is not None:
        return max(1, int(cfg.workers))
    cap = os.environ.get("CSBM_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = min(n, int(cap))
        except ValueError as exc:
            raise ParameterError(f"CSBM_THREADS must be an integer, got {cap!r}") from exc
    return max(1, n)


def sweep(cfg: SweepConfig) -> SweepResult:
    seeds = run_seeds(cfg)
    cells = cfg.cells()
    cfg_dict = cfg.to_dict()
    tasks = [(cfg_dict, lam, mu, [seeds[(c, r)] for r in range(cfg.runs)]) for c, lam, mu in cells]
    workers = min(worker_count(cfg), len(tasks))
    if workers <= 1:
        per_cell = [_run_cell(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_cell = list(pool.map(_run_cell, tasks, chunksize=1))
    rows = [_aggregate(lam, mu, alg, res)
            for (_, lam, mu), res in zip(cells, per_cell)
            for alg in cfg.algorithms]
    return SweepResult(rows, cfg, seeds)


def _fmt(x) -> str:
    if isinstance(x, float):
        return "nan" if math.isnan(x) else repr(round(x, 12))
    return str(x)


def format_csv(rows: list) -> str:
    lines = [CSV_TAG, ",".join(COLUMNS)]
    for r in rows:
        cells = [_fmt(r[c]) for c in COLUMNS]
        cells[-1] = '"' + str(r["error"]).replace('"', "'").replace("\n", " ") + '"' if r["error"] else ""
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def write_outputs(result: SweepResult, out_dir=None) -> tuple[Path, Path]:
    out = Path(out_dir or result.config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path, manifest_path = out / "sweep.csv", out / "manifest.json"
    csv_path.write_text(format_csv(result.rows))
    manifest = {
        "format": CSV_TAG.lstrip("# "),
        "code_version": __version__,
        "config": result.config.to_dict(),
        "n_cells": result.config.lam_count * result.config.mu_count,
        "n_rows": len(result.rows),
        "n_errors": result.n_errors,
    }
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return csv_path, manifest_path


def read_csv(path) -> list:
    """Parse a sweep CSV back into row dicts (schema-checked)."""
    import csv

    text = Path(path).read_text().splitlines()
    if not text or text[0].strip() != CSV_TAG:
        raise ValueError(f"missing schema header {CSV_TAG!r}")
    reader = csv.DictReader(text[1:])
    if tuple(reader.fieldnames or ()) != COLUMNS:
        raise ValueError(f"column mismatch: expected {COLUMNS}, got {reader.fieldnames}")
    rows = []
    for rec in reader:
        row = dict(rec)
        for c in COLUMNS:
            if c in ("algorithm", "error"):
                continue
            row[c] = int(rec[c]) if c in ("n_runs", "n_errors") else float(rec[c])
        rows.append(row)
    return rows
