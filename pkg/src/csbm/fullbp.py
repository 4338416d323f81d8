"""Full nonlinear AMP/BP for the contextual SBM.

Graph messages pass through ``f(z; rho) = 0.5 log(cosh(z + rho) / cosh(z - rho))``
with ``rho = atanh(lam / sqrt d)``; the non-edge correction uses
``rho_n = atanh(lam sqrt d / (n - d))``.  Covariate messages carry
precisions ``tau`` that are refreshed before ``m`` at every step, because
the ``m`` update at ``t+1`` needs ``tau^{t+1}``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linbp import MessageState, RunResult, _finish, check_state, random_state, step_summary
from .model import Instance, ModelParams, ParameterError

SATURATION = 50.0


class BPDivergence(FloatingPointError):
    """The precision update produced a non-positive denominator."""


@dataclass(frozen=True)
class BPConfig:
    rho: float
    rho_n: float
    t_max: int = 50
    init_scale: float = 0.01


def make_config(params: ModelParams, t_max: int = 50, init_scale: float = 0.01) -> BPConfig:
    sd = math.sqrt(params.d)
    if params.lam >= sd:
        raise ParameterError(f"rho = atanh(lambda/sqrt(d)) needs lambda < sqrt(d), got lambda={params.lam}")
    if params.lam * sd >= params.n - params.d:
        raise ParameterError("rho_n needs lambda*sqrt(d) < n - d")
    return BPConfig(
        rho=math.atanh(params.lam / sd),
        rho_n=math.atanh(params.lam * sd / (params.n - params.d)),
        t_max=int(t_max),
        init_scale=float(init_scale),
    )


def logcosh(x):
    ax = np.abs(x)
    return ax + np.log1p(np.exp(-2.0 * ax)) - math.log(2.0)


def _log1p_exp2(x):
    return np.log1p(np.exp(-2.0 * np.abs(x)))


def f_rho(z, rho):
    """``0.5 log(cosh(z + rho) / cosh(z - rho))``, overflow-free for large ``|z|``.

    The ``|z +/- rho|`` parts of the two log-cosh terms cancel to
    ``sign(z) sign(rho) min(|z|, |rho|)`` exactly, so ``|f| <= |rho|`` holds
    in floating point too.
    """
    z = np.asarray(z, dtype=np.float64)
    cap = abs(float(rho))
    lin = np.sign(z) * np.sign(rho) * np.minimum(np.abs(z), cap)
    out = lin + 0.5 * (_log1p_exp2(z + rho) - _log1p_exp2(z - rho))
    return np.clip(out, -cap, cap)


def fullbp_step(inst: Instance, state: MessageState, cfg: BPConfig) -> MessageState:
    check_state(inst, state)
    prm, g, B = inst.params, inst.graph, inst.covariates
    mu, gamma = prm.mu, prm.gamma
    s = math.sqrt(mu / gamma)
    if np.any(state.tau <= 0):
        raise BPDivergence("tau must be positive")

    th = np.tanh(state.eta)
    if mu > 0:
        Bsq = inst.covariates_sq
        row = Bsq @ (1.0 - th * th)
        denom = 1.0 + mu - (mu / gamma) * row
        if np.any(denom <= 0):
            q = int(np.argmin(denom))
            raise BPDivergence(
                f"tau update non-positive at q={q}: 1 + mu - (mu/gamma) sum_j B_qj^2 sech^2 = {denom[q]:.3g}"
            )
        tau = 1.0 / denom
        m_new = (s / tau) * (B @ th) - (mu / (gamma * tau)) * row * state.m_prev
        cov = s * (B.T @ state.m)
        eta_mem = (mu / gamma) * (Bsq.T @ (1.0 / state.tau)) * np.tanh(state.eta_prev)
    else:
        tau = np.ones(prm.p)
        m_new = np.zeros(prm.p)
        cov = eta_mem = 0.0

    f_edge = f_rho(state.eta_edge, cfg.rho)
    if f_edge.size and np.max(np.abs(f_edge)) > cfg.rho * (1 + 1e-12):
        raise AssertionError("f(z; rho) exceeded its saturation value rho")
    incoming = g.in_sum(f_edge)
    field = cov - eta_mem - np.sum(f_rho(state.eta, cfg.rho_n))
    eta_new = field + incoming
    if np.isscalar(field):
        field = np.full(prm.n, field)
    edge_new = field[g.src] + incoming[g.src] - f_edge[g.rev]
    return MessageState(eta_new, edge_new, m_new, state.eta, state.eta_edge, state.m,
                        tau, state.step + 1)


def fullbp_run(inst: Instance, cfg: BPConfig, seed: int, *, init: MessageState | None = None) -> RunResult:
    """Run full BP from i.i.d. ``N(0, init_scale)`` messages (``t-1`` copies included)."""
    state = init if init is not None else random_state(inst, cfg.init_scale, seed, random_prev=True)
    start = state
    trace = [step_summary(inst, state) | {"saturated": False}]
    for _ in range(cfg.t_max):
        state = fullbp_step(inst, state, cfg)
        saturated = bool(np.max(np.abs(state.eta), initial=0.0) > SATURATION)
        trace.append(step_summary(inst, state) | {"saturated": saturated})
    return _finish(inst, start, state, trace)
