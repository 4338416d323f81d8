"""Contextual stochastic block model and its Gaussian surrogate.

Two observation models share the same latent structure: labels
``v in {+1, -1}^n`` and a direction ``u ~ N(0, I_p / p)``.

* sparse model: an SBM graph with edge rates ``c_in / n`` (same label) and
  ``c_out / n`` (different labels), ``c_in/out = d +/- lambda sqrt(d)``,
  plus covariates ``b_i = sqrt(mu / n) v_i u + Z_i / sqrt(p)``;
* Gaussian model: ``A = lambda v v^T / n + W`` with ``W`` a GOE matrix of
  off-diagonal variance ``1/n``, and the same covariates.

Covariates are stored as a ``p x n`` matrix ``B`` whose column ``i``
belongs to node ``i``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import rng as rngmod


class ParameterError(ValueError):
    """Invalid model or algorithm parameters."""


@dataclass(frozen=True)
class ModelParams:
    n: int
    p: int
    d: float
    lam: float
    mu: float

    @property
    def gamma(self) -> float:
        return self.n / self.p

    @property
    def c_in(self) -> float:
        return self.d + self.lam * math.sqrt(self.d)

    @property
    def c_out(self) -> float:
        return self.d - self.lam * math.sqrt(self.d)

    def as_dict(self) -> dict:
        return {"n": self.n, "p": self.p, "d": self.d, "lambda": self.lam, "mu": self.mu}


def derive_params(n: int, p: int, d: float, lam: float, mu: float, *, check_graph: bool = True) -> ModelParams:
    """Validate ``(n, p, d, lambda, mu)`` and return :class:`ModelParams`.

    ``check_graph=False`` skips the constraints that only matter for the
    sparse graph (``lambda <= sqrt(d)``, ``c_in <= n``); the Gaussian model
    ignores ``d``.
    """
    if int(n) != n or int(p) != p or n < 2 or p < 2:
        raise ParameterError(f"n and p must be integers >= 2, got n={n}, p={p}")
    if lam < 0 or mu < 0:
        raise ParameterError(f"lambda and mu must be non-negative, got {lam}, {mu}")
    params = ModelParams(int(n), int(p), float(d), float(lam), float(mu))
    if check_graph:
        if d < 1:
            raise ParameterError(f"mean degree d must be >= 1, got {d}")
        if params.c_out < 0:
            raise ParameterError(f"lambda={lam} exceeds sqrt(d)={math.sqrt(d):.6g}: c_out would be negative")
        if params.c_in > n:
            raise ParameterError(f"c_in={params.c_in:.6g} exceeds n={n}: edge probability above 1")
    return params


@dataclass(frozen=True)
class Latents:
    v: np.ndarray
    u: np.ndarray


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected simple graph stored as a sorted edge list.

    Directed edge ``2k`` is ``edges[k, 0] -> edges[k, 1]`` and ``2k + 1`` is
    its reverse, so the reverse of directed edge ``e`` is ``e ^ 1``.
    """

    n: int
    edges: np.ndarray  # (m, 2) int64, rows i < j, lexicographically sorted

    @cached_property
    def src(self) -> np.ndarray:
        return self.edges.reshape(-1)

    @cached_property
    def dst(self) -> np.ndarray:
        return self.edges[:, ::-1].reshape(-1)

    @cached_property
    def rev(self) -> np.ndarray:
        return np.arange(2 * len(self.edges)) ^ 1

    @cached_property
    def degree(self) -> np.ndarray:
        return np.bincount(self.src, minlength=self.n)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def in_sum(self, x_edge: np.ndarray) -> np.ndarray:
        """``sum_{k in di} x_{k->i}`` for every node ``i``."""
        return np.bincount(self.dst, weights=x_edge, minlength=self.n)

    def adjacency(self):
        import scipy.sparse as sp

        m = self.n_edges
        return sp.csr_matrix(
            (np.ones(2 * m), (self.src, self.dst)), shape=(self.n, self.n)
        )


@dataclass(frozen=True, eq=False)
class Instance:
    graph: Graph
    covariates: np.ndarray  # B, shape (p, n)
    truth: Latents
    params: ModelParams
    seed: int

    @cached_property
    def covariates_sq(self) -> np.ndarray:
        return self.covariates * self.covariates


@dataclass(frozen=True, eq=False)
class GaussianInstance:
    matrix_a: np.ndarray  # (n, n) symmetric
    covariates: np.ndarray  # (p, n)
    truth: Latents
    params: ModelParams
    seed: int


def sample_latents(params: ModelParams, seed: int) -> Latents:
    v = rngmod.stream(seed, rngmod.LABELS).choice(np.array([1, -1], dtype=np.int8), size=params.n)
    u = rngmod.stream(seed, rngmod.LATENT).normal(0.0, 1.0 / math.sqrt(params.p), size=params.p)
    return Latents(v=v, u=u)


def sample_covariates(params: ModelParams, truth: Latents, seed: int) -> np.ndarray:
    gen = rngmod.stream(seed, rngmod.NOISE)
    B = gen.standard_normal((params.p, params.n))
    B *= 1.0 / math.sqrt(params.p)
    if params.mu > 0:
        B += math.sqrt(params.mu / params.n) * np.outer(truth.u, truth.v)
    return B


def _bernoulli_positions(gen: np.random.Generator, size: int, q: float) -> np.ndarray:
    """Indices in ``range(size)`` kept by independent Bernoulli(q) trials.

    Uses geometric gaps between successes, so the cost is proportional to
    the number of successes rather than ``size``.
    """
    if size <= 0 or q <= 0.0:
        return np.empty(0, dtype=np.int64)
    if q >= 1.0:
        return np.arange(size, dtype=np.int64)
    expected = size * q
    chunk = int(expected + 6.0 * math.sqrt(expected) + 16)
    parts = []
    last = -1
    while last < size - 1:
        # geometric gaps by inversion, clipped so tiny q cannot overflow int64
        with np.errstate(over="ignore", divide="ignore"):
            gaps = np.floor(np.log(1.0 - gen.random(chunk)) / math.log1p(-q)) + 1.0
        pos = last + np.cumsum(np.minimum(gaps, size + 1.0).astype(np.int64))
        parts.append(pos)
        last = int(pos[-1])
    pos = np.concatenate(parts)
    return pos[pos < size]


def _triangle_pairs(k: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Decode ``k = j(j-1)/2 + i`` into pairs ``i < j``."""
    j = np.floor((1.0 + np.sqrt(1.0 + 8.0 * k.astype(np.float64))) / 2.0).astype(np.int64)
    j -= (j * (j - 1) // 2) > k
    j += ((j + 1) * j // 2) <= k
    i = k - j * (j - 1) // 2
    return i, j


def _sample_edges(params: ModelParams, v: np.ndarray, gen: np.random.Generator) -> np.ndarray:
    n = params.n
    q_in, q_out = params.c_in / n, params.c_out / n
    plus = np.flatnonzero(v > 0)
    minus = np.flatnonzero(v < 0)
    blocks = []
    for members in (plus, minus):
        s = len(members)
        k = _bernoulli_positions(gen, s * (s - 1) // 2, q_in)
        i, j = _triangle_pairs(k)
        blocks.append(np.stack([members[i], members[j]], axis=1))
    k = _bernoulli_positions(gen, len(plus) * len(minus), q_out)
    a, b = np.divmod(k, len(minus)) if len(minus) else (k, k)
    blocks.append(np.stack([plus[a], minus[b]], axis=1))
    edges = np.concatenate(blocks).astype(np.int64)
    edges.sort(axis=1)
    order = np.lexsort((edges[:, 1], edges[:, 0]))
    return edges[order]


def _sample_edges_dense(params: ModelParams, v: np.ndarray, gen: np.random.Generator) -> np.ndarray:
    n = params.n
    i, j = np.triu_indices(n, k=1)
    prob = np.where(v[i] == v[j], params.c_in / n, params.c_out / n)
    keep = gen.random(len(i)) < prob
    return np.stack([i[keep], j[keep]], axis=1).astype(np.int64)


def sample_contextual(params: ModelParams, seed: int, *, method: str = "skip") -> Instance:
    """Sample ``(A^G, B)`` with ground truth.

    ``method="dense"`` draws every pair explicitly (O(n^2), debugging only);
    it has the same law as the default but not the same bits.
    """
    derive_params(params.n, params.p, params.d, params.lam, params.mu)
    truth = sample_latents(params, seed)
    gen = rngmod.stream(seed, rngmod.GRAPH)
    if method == "skip":
        edges = _sample_edges(params, truth.v, gen)
    elif method == "dense":
        edges = _sample_edges_dense(params, truth.v, gen)
    else:
        raise ParameterError(f"unknown edge sampling method {method!r}")
    B = sample_covariates(params, truth, seed)
    return Instance(Graph(params.n, edges), B, truth, params, int(seed))


def sample_gaussian(params: ModelParams, seed: int) -> GaussianInstance:
    """Sample ``(A, B)`` from the Gaussian observation model (``d`` unused)."""
    derive_params(params.n, params.p, params.d, params.lam, params.mu, check_graph=False)
    truth = sample_latents(params, seed)
    n = params.n
    G = rngmod.stream(seed, rngmod.GRAPH).standard_normal((n, n))
    A = G + G.T
    A *= 1.0 / math.sqrt(2.0 * n)
    if params.lam > 0:
        vf = truth.v.astype(np.float64)
        A += (params.lam / n) * np.outer(vf, vf)
    B = sample_covariates(params, truth, seed)
    return GaussianInstance(A, B, truth, params, int(seed))
