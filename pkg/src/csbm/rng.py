"""Seeded random streams.

Every random draw in the package goes through :func:`stream`, which keys a
Philox counter-based generator by ``(seed, *path)``.  Distinct paths give
statistically independent streams, so e.g. the graph and the covariate noise
of one instance never share draws, and sweep runs are reproducible no matter
in which order (or in which process) they execute.

Stream layout
-------------
Instances (``model``)::

    (seed, 0)   labels v
    (seed, 1)   latent direction u
    (seed, 2)   graph edges / Gaussian matrix A
    (seed, 3)   covariate noise Z

Algorithms use their own run seed::

    (seed, 10)  message-passing initialisation
    (seed, 11)  eigensolver start vector
    (seed, 20, t) density-evolution step t
    (seed, 21)  density-evolution initial pool

Sweeps derive the per-run seed from ``(base_seed, cell, run)`` with
:func:`derive_seed`.
"""
from __future__ import annotations

import numpy as np

LABELS = 0
LATENT = 1
GRAPH = 2
NOISE = 3
MP_INIT = 10
EIG_START = 11
DE_STEP = 20
DE_INIT = 21


def stream(seed: int, *path: int) -> np.random.Generator:
    """Return an independent generator for ``(seed, *path)``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in path))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(base_seed: int, *path: int) -> int:
    """Deterministic 63-bit child seed of ``base_seed`` along ``path``."""
    ss = np.random.SeedSequence(entropy=int(base_seed), spawn_key=tuple(int(k) for k in path))
    return int(ss.generate_state(1, dtype=np.uint64)[0]) >> 1
