"""Linearised approximate message passing on the contextual SBM.

Messages live on the ``n`` vertices (``eta``), on the ``2|E|`` directed
edges (``eta_edge``, indexed as in :class:`csbm.model.Graph`) and on the
``p`` covariate coordinates (``m``).  One step computes::

    eta_edge'[i->j] = s (B^T m)_i - (mu/gamma) eta_prev_i
                      + (lam/sqrt d) sum_{k in di \\ j} eta_edge[k->i]
                      - (lam sqrt d / n) sum_k eta_k
    eta'[i]         = same, summing over all of di
    m'              = s B eta - mu m_prev

with ``s = sqrt(mu/gamma)``.  The memory terms use the ``t-1`` iterates.

``exact_onsager=True`` replaces the law-of-large-numbers constants in the
memory terms by their finite-sample values (``sum_q B_qi^2 / tau_q`` and
``sum_j B_qj^2``) and adapts ``tau``; ``mean_field="exact"`` uses
``lam sqrt d / (n - d)`` for the global field.  With both switched on the
step is exactly the derivative of :func:`csbm.fullbp.fullbp_step` at zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import rng as rngmod
from .metrics import covariate_overlap, overlap
from .model import Instance


@dataclass(frozen=True, eq=False)
class MessageState:
    eta: np.ndarray
    eta_edge: np.ndarray
    m: np.ndarray
    eta_prev: np.ndarray
    eta_edge_prev: np.ndarray
    m_prev: np.ndarray
    tau: np.ndarray
    step: int = 0

    def __add__(self, other: "MessageState") -> "MessageState":
        return self._combine(other, 1.0, 1.0)

    def scaled(self, c: float) -> "MessageState":
        return self._combine(self, c, 0.0)

    def _combine(self, other, a, b):
        def mix(x, y):
            return a * x + b * y

        return replace(
            self,
            eta=mix(self.eta, other.eta),
            eta_edge=mix(self.eta_edge, other.eta_edge),
            m=mix(self.m, other.m),
            eta_prev=mix(self.eta_prev, other.eta_prev),
            eta_edge_prev=mix(self.eta_edge_prev, other.eta_edge_prev),
            m_prev=mix(self.m_prev, other.m_prev),
        )

    def negated(self) -> "MessageState":
        return self.scaled(-1.0)


def zero_state(inst: Instance) -> MessageState:
    n, p = inst.params.n, inst.params.p
    e = 2 * inst.graph.n_edges
    z = np.zeros
    return MessageState(z(n), z(e), z(p), z(n), z(e), z(p), np.ones(p), 0)


def random_state(inst: Instance, scale: float, seed: int, *, random_prev: bool = False) -> MessageState:
    """I.i.d. ``N(0, scale)`` messages; the ``t-1`` copies are zero unless ``random_prev``."""
    n, p = inst.params.n, inst.params.p
    e = 2 * inst.graph.n_edges
    gen = rngmod.stream(seed, rngmod.MP_INIT)
    sd = math.sqrt(scale)
    eta, eta_edge, m = gen.normal(0, sd, n), gen.normal(0, sd, e), gen.normal(0, sd, p)
    if random_prev:
        eta_prev, eta_edge_prev, m_prev = gen.normal(0, sd, n), gen.normal(0, sd, e), gen.normal(0, sd, p)
    else:
        eta_prev, eta_edge_prev, m_prev = np.zeros(n), np.zeros(e), np.zeros(p)
    return MessageState(eta, eta_edge, m, eta_prev, eta_edge_prev, m_prev, np.ones(p), 0)


def informative_state(inst: Instance, moments, seed: int) -> MessageState:
    """Initial messages correlated with the truth.

    ``moments = (m1, m2, m3, m4)``: vertex and edge messages are
    ``m1 v_i + N(0, m3 - m1^2)`` and ``m = m2 sqrt(p) u + N(0, m4 - m2^2)``,
    the finite-size counterpart of a Gaussian density-evolution pool.
    """
    m1, m2, m3, m4 = (float(x) for x in moments)
    if m3 < m1 * m1 or m4 < m2 * m2:
        raise ValueError("moments violate Cauchy-Schwarz")
    g = inst.graph
    gen = rngmod.stream(seed, rngmod.MP_INIT)
    v = inst.truth.v.astype(np.float64)
    n, p = inst.params.n, inst.params.p
    se, sm = math.sqrt(m3 - m1 * m1), math.sqrt(m4 - m2 * m2)
    eta = m1 * v + se * gen.standard_normal(n)
    eta_edge = m1 * v[g.src] + se * gen.standard_normal(2 * g.n_edges)
    m = m2 * math.sqrt(p) * inst.truth.u + sm * gen.standard_normal(p)
    zeros = np.zeros
    return MessageState(eta, eta_edge, m, zeros(n), zeros(2 * g.n_edges), zeros(p), np.ones(p), 0)


def check_state(inst: Instance, state: MessageState) -> None:
    n, p = inst.params.n, inst.params.p
    e = 2 * inst.graph.n_edges
    shapes = {
        "eta": (state.eta, n), "eta_prev": (state.eta_prev, n),
        "eta_edge": (state.eta_edge, e), "eta_edge_prev": (state.eta_edge_prev, e),
        "m": (state.m, p), "m_prev": (state.m_prev, p), "tau": (state.tau, p),
    }
    for name, (arr, size) in shapes.items():
        if arr.shape != (size,):
            raise ValueError(f"state.{name} has shape {arr.shape}, instance expects ({size},)")


def mean_field_coef(inst: Instance, mean_field: str = "simple") -> float:
    prm = inst.params
    if mean_field == "simple":
        return prm.lam * math.sqrt(prm.d) / prm.n
    if mean_field == "exact":
        return prm.lam * math.sqrt(prm.d) / (prm.n - prm.d)
    raise ValueError(f"unknown mean_field {mean_field!r}")


def linbp_step(inst: Instance, state: MessageState, *, exact_onsager: bool = False,
               mean_field: str = "simple") -> MessageState:
    check_state(inst, state)
    prm, g, B = inst.params, inst.graph, inst.covariates
    mu, gamma = prm.mu, prm.gamma
    s = math.sqrt(mu / gamma)
    w = prm.lam / math.sqrt(prm.d)

    cov = s * (B.T @ state.m) if mu > 0 else np.zeros(prm.n)
    if exact_onsager and mu > 0:
        Bsq = inst.covariates_sq
        eta_mem = (mu / gamma) * (Bsq.T @ (1.0 / state.tau)) * state.eta_prev
        row = Bsq.sum(axis=1)
        tau = 1.0 / (1.0 + mu - (mu / gamma) * row)
        m_new = (s / tau) * (B @ state.eta) - (mu / (gamma * tau)) * row * state.m_prev
    else:
        eta_mem = (mu / gamma) * state.eta_prev
        tau = state.tau
        m_new = s * (B @ state.eta) - mu * state.m_prev if mu > 0 else np.zeros(prm.p)

    field = cov - eta_mem - mean_field_coef(inst, mean_field) * state.eta.sum()
    incoming = g.in_sum(state.eta_edge)
    eta_new = field + w * incoming
    edge_new = field[g.src] + w * (incoming[g.src] - state.eta_edge[g.rev])
    return MessageState(eta_new, edge_new, m_new, state.eta, state.eta_edge, state.m,
                        tau, state.step + 1)


def estimate_labels(eta) -> np.ndarray:
    """Sign estimate with ``sgn(0) = +1``."""
    eta = np.asarray(eta)
    return np.where(eta >= 0, 1, -1).astype(np.int8)


def null_test(norm0: float, normT: float) -> bool:
    """``True`` (reject the null) iff the vertex messages grew."""
    if norm0 < 0 or normT < 0:
        raise ValueError("norms must be non-negative")
    return normT > norm0


def step_summary(inst: Instance, state: MessageState) -> dict:
    m_norm = float(np.linalg.norm(state.m))
    cov = covariate_overlap(state.m, inst.truth.u) if m_norm > 0 else float("nan")
    return {
        "step": state.step,
        "eta_norm": float(np.linalg.norm(state.eta)),
        "m_norm": m_norm,
        "overlap": overlap(estimate_labels(state.eta), inst.truth.v),
        "cov_overlap": cov,
    }


@dataclass
class RunResult:
    state: MessageState
    initial: MessageState
    trace: list
    v_hat: np.ndarray
    u_hat: np.ndarray
    reject: bool


def _finish(inst, init, state, trace) -> RunResult:
    v_hat = estimate_labels(state.eta)
    nm = np.linalg.norm(state.m)
    u_hat = state.m / nm if nm > 0 else state.m.copy()
    reject = null_test(float(np.linalg.norm(init.eta)), float(np.linalg.norm(state.eta)))
    return RunResult(state, init, trace, v_hat, u_hat, reject)


def linbp_run(inst: Instance, t_max: int, init_scale: float, seed: int, *,
              exact_onsager: bool = False, mean_field: str = "simple",
              init: MessageState | None = None) -> RunResult:
    """Run ``t_max`` steps from a random ``N(0, init_scale)`` start."""
    if t_max < 0:
        raise ValueError("t_max must be >= 0")
    state = init if init is not None else random_state(inst, init_scale, seed)
    start = state
    trace = [step_summary(inst, state)]
    for _ in range(t_max):
        state = linbp_step(inst, state, exact_onsager=exact_onsager, mean_field=mean_field)
        trace.append(step_summary(inst, state))
    return _finish(inst, start, state, trace)
