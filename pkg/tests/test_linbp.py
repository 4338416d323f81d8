import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from csbm.linbp import (
    MessageState, check_state, estimate_labels, informative_state, linbp_run, linbp_step,
    null_test, random_state, zero_state,
)
from csbm.model import Graph, Instance, Latents, ModelParams, derive_params, sample_contextual


def _states_close(a, b, tol):
    for name in ("eta", "eta_edge", "m"):
        assert np.max(np.abs(getattr(a, name) - getattr(b, name)), initial=0.0) <= tol, name


def test_zero_state_fixed(small_sbm):
    out = linbp_step(small_sbm, zero_state(small_sbm))
    for x in (out.eta, out.eta_edge, out.m):
        assert not np.any(x)


def _nonbacktracking_oracle(inst, eta_edge, eta):
    """Graph-only recursion written with explicit neighbour loops."""
    prm, g = inst.params, inst.graph
    w = prm.lam / math.sqrt(prm.d)
    mf = prm.lam * math.sqrt(prm.d) / prm.n * eta.sum()
    idx = {}
    for e, (i, j) in enumerate(zip(g.src, g.dst)):
        idx[(int(i), int(j))] = e
    nbrs = [[] for _ in range(prm.n)]
    for i, j in idx:
        nbrs[i].append(j)
    out_edge = np.zeros_like(eta_edge)
    out_v = np.zeros(prm.n)
    for i in range(prm.n):
        tot = sum(eta_edge[idx[(k, i)]] for k in nbrs[i])
        out_v[i] = w * tot - mf
        for j in nbrs[i]:
            out_edge[idx[(i, j)]] = w * (tot - eta_edge[idx[(j, i)]]) - mf
    return out_edge, out_v


def test_mu_zero_matches_nonbacktracking():
    inst = sample_contextual(derive_params(50, 30, 4, 1.2, 0.0), 7)
    st0 = random_state(inst, 1.0, 3)
    out = linbp_step(inst, st0)
    oe, ov = _nonbacktracking_oracle(inst, st0.eta_edge, st0.eta)
    assert np.max(np.abs(out.eta_edge - oe)) < 1e-12
    assert np.max(np.abs(out.eta - ov)) < 1e-12
    assert not np.any(out.m)


def test_path_graph_hand_value():
    prm = ModelParams(2, 3, 4.0, 1.0, 0.0)
    inst = Instance(Graph(2, np.array([[0, 1]])), np.zeros((3, 2)),
                    Latents(np.array([1, -1], dtype=np.int8), np.zeros(3)), prm, 0)
    st0 = zero_state(inst)
    edge = np.zeros(2)
    edge[1] = 1.0  # directed edge 1 is 1 -> 0 (node "2" -> node "1")
    st0 = MessageState(st0.eta, edge, st0.m, st0.eta_prev, st0.eta_edge_prev, st0.m_prev, st0.tau)
    out = linbp_step(inst, st0)
    assert out.eta[0] == pytest.approx(0.5)


@settings(deadline=None, max_examples=20)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 1000))
def test_linearity(tiny_sbm, a, b, seed):
    s1 = random_state(tiny_sbm, 1.0, seed, random_prev=True)
    s2 = random_state(tiny_sbm, 1.0, seed + 1, random_prev=True)
    lhs = linbp_step(tiny_sbm, s1.scaled(a) + s2.scaled(b))
    rhs = linbp_step(tiny_sbm, s1).scaled(a) + linbp_step(tiny_sbm, s2).scaled(b)
    _states_close(lhs, rhs, 1e-10)


def test_sign_symmetry(small_sbm):
    s = random_state(small_sbm, 1.0, 5, random_prev=True)
    _states_close(linbp_step(small_sbm, s.negated()), linbp_step(small_sbm, s).negated(), 1e-12)


def test_edge_vertex_consistency(small_sbm):
    s = random_state(small_sbm, 1.0, 2, random_prev=True)
    out = linbp_step(small_sbm, s)
    g, prm = small_sbm.graph, small_sbm.params
    lhs = out.eta[g.src] - out.eta_edge
    rhs = prm.lam / math.sqrt(prm.d) * s.eta_edge[g.rev]
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_input_not_mutated(small_sbm):
    s = random_state(small_sbm, 1.0, 2)
    before = s.eta.copy()
    linbp_step(small_sbm, s)
    assert np.array_equal(before, s.eta)


def test_memory_shift(small_sbm):
    s = random_state(small_sbm, 1.0, 2)
    out = linbp_step(small_sbm, s)
    assert out.eta_prev is s.eta and out.m_prev is s.m and out.step == 1


def test_shape_mismatch(small_sbm, tiny_sbm):
    with pytest.raises(ValueError):
        linbp_step(small_sbm, zero_state(tiny_sbm))
    check_state(small_sbm, zero_state(small_sbm))


def test_estimate_labels():
    assert estimate_labels([1.2, -0.3, 0.0]).tolist() == [1, -1, 1]
    eta = np.array([0.4, -2.0, 3.0])
    assert np.array_equal(estimate_labels(-eta), -estimate_labels(eta))


def test_null_test():
    assert null_test(1.0, 5.0) is True
    assert null_test(1.0, 1.0) is False
    with pytest.raises(ValueError):
        null_test(-1.0, 1.0)


def test_run_tmax_zero(small_sbm):
    res = linbp_run(small_sbm, 0, 0.01, 4)
    init = random_state(small_sbm, 0.01, 4)
    assert np.array_equal(res.state.eta, init.eta)
    assert len(res.trace) == 1
    assert set(res.trace[0]) == {"step", "eta_norm", "m_norm", "overlap", "cov_overlap"}


def test_run_init_variance(small_sbm):
    s = random_state(small_sbm, 0.01, 8)
    assert abs(np.var(s.eta_edge) - 0.01) < 0.002
    assert not np.any(s.eta_prev)


def test_informative_state_moments():
    inst = sample_contextual(derive_params(20000, 2000, 5, 0.5, 0.5), 1)
    s = informative_state(inst, (0.5, 0.2, 1.0, 0.5), 2)
    v = inst.truth.v
    assert abs(np.mean(v * s.eta) - 0.5) < 0.03
    assert abs(np.mean(s.eta ** 2) - 1.0) < 0.05
    with pytest.raises(ValueError):
        informative_state(inst, (1.0, 0, 0.5, 1), 0)


@pytest.mark.slow
def test_growth_supercritical():
    prm = derive_params(800, 1000, 5, 0.9, 0.9)
    grew = [linbp_run(sample_contextual(prm, s), 50, 0.01, s).reject for s in range(20)]
    assert sum(grew) >= 18


@pytest.mark.slow
def test_subcritical_overlap_small():
    prm = derive_params(800, 1000, 5, 0.2, 0.2)
    small = []
    for s in range(20):
        inst = sample_contextual(prm, s)
        small.append(linbp_run(inst, 50, 0.01, s).trace[-1]["overlap"] <= 0.1)
    assert sum(small) >= 18


@pytest.mark.slow
def test_null_rejection_rate():
    prm = derive_params(800, 1000, 5, 0, 0)
    rate = np.mean([linbp_run(sample_contextual(prm, s), 50, 0.01, s).reject for s in range(50)])
    assert rate <= 0.2
