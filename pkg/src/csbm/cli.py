"""Command-line harness: ``csbm {generate,run,sweep,de,theory,report}``.

Every subcommand accepts ``--config FILE`` (a JSON object whose keys are
the long option names with ``-`` replaced by ``_``); explicit flags
override the file.  Outputs carry no timestamps, so reruns with the same
configuration are byte-identical.

Exit codes: 0 success, 2 configuration error, 3 sweep finished with failed
runs.
"""
from __future__ import annotations

import argparse
import csv
import io as _io
import json
import math
import sys
from pathlib import Path

from . import __version__
from . import io as iomod
from .de import DEParams, de_run, jacobian_radius
from .fullbp import fullbp_run, make_config
from .linbp import linbp_run
from .metrics import RunSummary, covariate_overlap, overlap
from .model import GaussianInstance, ParameterError, derive_params, sample_contextual, sample_gaussian
from .spectral import decision_threshold, minimize_xi, null_value
from .sweep import SweepConfig, sweep, write_outputs
from .theory import ComparisonParams, predicted_opt, threshold

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 2, 3

TRACE_COLUMNS = ("step", "eta_norm", "m_norm", "overlap", "cov_overlap")

DEFAULTS = {
    "generate": {"n": 800, "p": 1000, "d": 5.0, "lambda": 1.0, "mu": 1.0, "seed": 0,
                 "model": "sbm", "format": "json", "out": None},
    "run": {"alg": "linbp", "model": "sbm", "n": 800, "p": 1000, "d": 5.0, "lambda": 1.0, "mu": 1.0,
            "seed": 0, "tmax": 50, "init_scale": 0.01, "exact_onsager": False, "delta": 0.05,
            "trace": None, "out": None, "instance": None, "test_lambda": None, "test_mu": None},
    "sweep": {"n": 800, "p": 1000, "d": 5.0, "lam_range": [0.0, 1.0], "lam_count": 11,
              "mu_range": None, "mu_count": 11, "runs": 20, "alg": ["fullbp", "linbp"],
              "tmax": 50, "init_scale": 0.01, "seed": 0, "model": "sbm", "delta": 0.05,
              "out_dir": "sweep_out", "workers": None},
    "de": {"lambda": 0.9, "mu": 0.9, "gamma": 0.8, "d": 5.0, "pool": 100000, "tmax": 20,
           "init_m1": 0.1, "init_m2": 0.0, "init_m3": 1.0, "init_m4": 1.0, "seed": 0, "out": None},
    "theory": {"lambda": 1.0, "mu": 1.0, "gamma": 1.0, "b": None, "rho": 1.0, "tau": 1.0, "out": None},
    "report": {"csv": None, "out_dir": "report", "gamma": None},
}


class ConfigError(Exception):
    pass


def _num(x) -> float | None:
    """JSON-safe float (NaN becomes null)."""
    if x is None:
        return None
    x = float(x)
    return None if math.isnan(x) or math.isinf(x) else x


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _params(cfg: dict):
    return derive_params(cfg["n"], cfg["p"], cfg["d"], cfg["lambda"], cfg["mu"],
                         check_graph=cfg["model"] == "sbm")


def _sample(cfg: dict):
    prm = _params(cfg)
    if cfg["model"] == "sbm":
        return sample_contextual(prm, cfg["seed"])
    if cfg["model"] == "gaussian":
        return sample_gaussian(prm, cfg["seed"])
    raise ConfigError(f"unknown model {cfg['model']!r}")


def cmd_generate(cfg: dict) -> int:
    if not cfg["out"]:
        raise ConfigError("generate needs --out")
    if cfg["format"] not in ("json", "bin"):
        raise ConfigError(f"unknown format {cfg['format']!r}")
    iomod.save(_sample(cfg), cfg["out"], cfg["format"])
    return EXIT_OK


def _trace_csv(trace: list) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for row in trace:
        w.writerow([row["step"]] + [repr(float(row[c])) for c in TRACE_COLUMNS[1:]])
    return buf.getvalue()


def cmd_run(cfg: dict) -> int:
    inst = iomod.load(cfg["instance"]) if cfg["instance"] else _sample(cfg)
    prm = inst.params
    alg, seed = cfg["alg"], cfg["seed"]
    gaussian = isinstance(inst, GaussianInstance)
    extra = {"model": "gaussian" if gaussian else "sbm"}
    if alg in ("linbp", "fullbp"):
        if gaussian:
            raise ConfigError(f"{alg} needs a graph instance (--model sbm)")
        if alg == "linbp":
            res = linbp_run(inst, cfg["tmax"], cfg["init_scale"], seed, exact_onsager=cfg["exact_onsager"])
        else:
            res = fullbp_run(inst, make_config(prm, cfg["tmax"], cfg["init_scale"]), seed)
        last = res.trace[-1]
        summary = RunSummary(alg, prm.as_dict(), seed, overlap(res.v_hat, inst.truth.v),
                             _num(last["cov_overlap"]), "reject" if res.reject else "accept",
                             trace=res.trace)
        extra |= {"eta_norm_initial": res.trace[0]["eta_norm"], "eta_norm_final": last["eta_norm"],
                  "tmax": cfg["tmax"], "init_scale": cfg["init_scale"]}
        if alg == "linbp":
            extra["exact_onsager"] = bool(cfg["exact_onsager"])
        if cfg["trace"]:
            Path(cfg["trace"]).write_text(_trace_csv(res.trace))
    elif alg == "spectral":
        lam = prm.lam if cfg["test_lambda"] is None else float(cfg["test_lambda"])
        mu = prm.mu if cfg["test_mu"] is None else float(cfg["test_mu"])
        if cfg["delta"] < 0:
            raise ConfigError("delta must be non-negative")
        res = minimize_xi(inst, lam, mu, prm.gamma, seed=seed)
        thr = decision_threshold(res, lam, mu, prm.gamma)
        u_hat = inst.covariates @ res.v_hat
        cov = covariate_overlap(u_hat, inst.truth.u) if u_hat.any() else None
        reject = res.t_value > thr + cfg["delta"]
        summary = RunSummary(alg, prm.as_dict(), seed, overlap(res.v_hat, inst.truth.v), cov,
                             "reject" if reject else "accept")
        extra |= {"xi_star": _num(res.xi_star), "t_value": res.t_value, "threshold": thr,
                  "delta": cfg["delta"], "path": res.path, "test_lambda": lam, "test_mu": mu,
                  "eig_iters": res.eig_iters}
        if not gaussian:
            extra["experimental"] = True
    else:
        raise ConfigError(f"unknown algorithm {alg!r}")
    summary.extra = extra
    _emit(_json(summary.to_json_dict()), cfg["out"])
    return EXIT_OK


def cmd_sweep(cfg: dict) -> int:
    try:
        scfg = SweepConfig(
            n=cfg["n"], p=cfg["p"], d=cfg["d"], lam_range=tuple(cfg["lam_range"]),
            lam_count=cfg["lam_count"], mu_range=None if cfg["mu_range"] is None else tuple(cfg["mu_range"]),
            mu_count=cfg["mu_count"], runs=cfg["runs"], algorithms=tuple(cfg["alg"]), t_max=cfg["tmax"],
            init_scale=cfg["init_scale"], base_seed=cfg["seed"], model=cfg["model"], delta=cfg["delta"],
            out_dir=cfg["out_dir"], workers=cfg["workers"],
        )
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    result = sweep(scfg)
    csv_path, _ = write_outputs(result)
    if result.n_errors:
        print(f"sweep finished with {result.n_errors} failed runs; see {csv_path}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_de(cfg: dict) -> int:
    prm = DEParams(cfg["lambda"], cfg["mu"], cfg["gamma"], cfg["d"])
    if prm.gamma <= 0:
        raise ConfigError("gamma must be positive")
    init = (cfg["init_m1"], cfg["init_m2"], cfg["init_m3"], cfg["init_m4"])
    traj = de_run(prm, init, cfg["tmax"], cfg["pool"], cfg["seed"])
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", "m1", "m2", "m3", "m4", "m1/sqrt(m3)"])
    for t, m in enumerate(traj.moments):
        w.writerow([t] + [repr(float(x)) for x in m] + [repr(float(m.normalized_correlation()))])
    _emit(buf.getvalue(), cfg["out"])
    return EXIT_OK


def cmd_theory(cfg: dict) -> int:
    lam, mu, gamma = cfg["lambda"], cfg["mu"], cfg["gamma"]
    if gamma <= 0 or lam < 0 or mu < 0:
        raise ConfigError("need lambda, mu >= 0 and gamma > 0")
    if cfg["b"] is None:
        if lam <= 0:
            raise ConfigError("lambda = 0 needs an explicit --b")
        cp = ComparisonParams.for_statistic(lam, mu, gamma)
        null = null_value(lam, mu, gamma)
    else:
        cp = ComparisonParams(lam, mu, gamma, cfg["b"], cfg["rho"], cfg["tau"])
        null = math.sqrt(4 * cp.rho + cp.b ** 2 * cp.tau) + cp.b * math.sqrt(cp.tau / gamma)
    opt = predicted_opt(cp)
    out = {
        "threshold": threshold(lam, mu, gamma),
        "jacobian_radius": jacobian_radius(lam, mu, gamma),
        "predicted_opt": opt.value,
        "t_star": _num(opt.t_star),
        "t_star_at_boundary": opt.boundary,
        "null_value": null,
        "b": cp.b, "rho": cp.rho, "tau": cp.tau,
    }
    _emit(_json(out), cfg["out"])
    return EXIT_OK


def cmd_report(cfg: dict) -> int:
    from .report import report

    if not cfg["csv"]:
        raise ConfigError("report needs a sweep CSV path")
    for path in report(cfg["csv"], cfg["out_dir"], cfg["gamma"]):
        print(path)
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "run": cmd_run, "sweep": cmd_sweep, "de": cmd_de,
            "theory": cmd_theory, "report": cmd_report}


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    parser = argparse.ArgumentParser(prog="csbm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"csbm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_):
        p = sub.add_parser(name, help=help_, argument_default=S)
        p.add_argument("--config", help="JSON file with option values (flags override it)")
        return p

    def model_flags(p):
        p.add_argument("--n", type=int)
        p.add_argument("--p", type=int)
        p.add_argument("--d", type=float)
        p.add_argument("--lambda", dest="lambda", type=float)
        p.add_argument("--mu", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--model", choices=["sbm", "gaussian"])

    p = add("generate", "sample an instance and write it to disk")
    model_flags(p)
    p.add_argument("--format", choices=["json", "bin"])
    p.add_argument("--out")

    p = add("run", "run one algorithm on one instance")
    model_flags(p)
    p.add_argument("--alg", choices=["linbp", "fullbp", "spectral"])
    p.add_argument("--instance", help="load a saved instance instead of sampling")
    p.add_argument("--tmax", type=int)
    p.add_argument("--init-scale", dest="init_scale", type=float)
    p.add_argument("--exact-onsager", dest="exact_onsager", action="store_true")
    p.add_argument("--delta", type=float)
    p.add_argument("--test-lambda", dest="test_lambda", type=float)
    p.add_argument("--test-mu", dest="test_mu", type=float)
    p.add_argument("--trace", help="per-step trace CSV path")
    p.add_argument("--out", help="result JSON path (default stdout)")

    p = add("sweep", "phase-diagram sweep over a (lambda, mu) grid")
    p.add_argument("--n", type=int)
    p.add_argument("--p", type=int)
    p.add_argument("--d", type=float)
    p.add_argument("--lam-range", dest="lam_range", type=float, nargs=2)
    p.add_argument("--lam-count", dest="lam_count", type=int)
    p.add_argument("--mu-range", dest="mu_range", type=float, nargs=2)
    p.add_argument("--mu-count", dest="mu_count", type=int)
    p.add_argument("--runs", type=int)
    p.add_argument("--alg", nargs="+", choices=["linbp", "fullbp", "spectral"])
    p.add_argument("--tmax", type=int)
    p.add_argument("--init-scale", dest="init_scale", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--model", choices=["sbm", "gaussian"])
    p.add_argument("--delta", type=float)
    p.add_argument("--workers", type=int)
    p.add_argument("--out-dir", dest="out_dir")

    p = add("de", "density evolution by population dynamics")
    p.add_argument("--lambda", dest="lambda", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--d", type=float)
    p.add_argument("--pool", type=int)
    p.add_argument("--tmax", type=int)
    for k in range(1, 5):
        p.add_argument(f"--init-m{k}", dest=f"init_m{k}", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")

    p = add("theory", "closed-form predictions")
    p.add_argument("--lambda", dest="lambda", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--out")

    p = add("report", "heatmaps and summary from a sweep CSV")
    p.add_argument("csv", nargs="?")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--gamma", type=float)
    return parser


def resolve_config(command: str, ns: argparse.Namespace) -> dict:
    """Defaults, then the JSON file, then explicit flags."""
    cfg = dict(DEFAULTS[command])
    flags = {k: v for k, v in vars(ns).items() if k not in ("command", "config")}
    path = getattr(ns, "config", None)
    if path:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        data = {k.replace("-", "_"): v for k, v in data.items()}
        unknown = set(data) - set(cfg)
        if unknown:
            raise ConfigError(f"unknown config keys for {command}: {sorted(unknown)}")
        cfg.update(data)
    cfg.update(flags)
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = resolve_config(ns.command, ns)
        return COMMANDS[ns.command](cfg)
    except (ConfigError, ParameterError) as exc:
        print(f"csbm {ns.command}: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"csbm {ns.command}: invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
