"""Density evolution for the linearised message passing.

The law of ``(eta_bar, V)`` is represented by samples of ``eta_bar | V=+1``
only; the ``V=-1`` law is the mirror image.  The law of ``(m_bar, U)`` is a
pool of pairs.  One DE step freezes the four moments

    m1 = E[V eta],  m2 = E[U m],  m3 = E[eta^2],  m4 = E[m^2]

at the start of the step and resamples both pools.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import rng as rngmod
from .model import ParameterError


@dataclass(frozen=True)
class DEParams:
    lam: float
    mu: float
    gamma: float
    d: float = 5.0

    @classmethod
    def of(cls, params) -> "DEParams":
        return cls(params.lam, params.mu, params.gamma, params.d)


class MomentVector(NamedTuple):
    m1: float
    m2: float
    m3: float
    m4: float

    def normalized_correlation(self) -> float:
        return self.m1 / math.sqrt(self.m3) if self.m3 > 0 else 0.0


@dataclass(frozen=True, eq=False)
class DEPool:
    eta_plus: np.ndarray
    m_bar: np.ndarray
    u: np.ndarray
    params: DEParams
    step: int = 0

    @property
    def pool_size(self) -> int:
        return len(self.eta_plus)


def init_pool(params, moments, pool_size: int = 100_000, seed: int = 0, *, matched: bool = True) -> DEPool:
    """Gaussian pool with the given moments.

    ``eta | V=+1 ~ N(m1, m3 - m1^2)`` and ``m = m2 U + N(0, m4 - m2^2)``.  With
    ``matched=True`` the raw normals are standardised (and the ``m`` noise
    made orthogonal to ``U``) so the pool moments equal the targets exactly.
    """
    m1, m2, m3, m4 = (float(x) for x in moments)
    if m3 < m1 * m1 or m4 < m2 * m2:
        raise ValueError("moments violate Cauchy-Schwarz")
    if pool_size < 2:
        raise ValueError("pool_size must be >= 2")
    gen = rngmod.stream(seed, rngmod.DE_INIT)
    x, u, y = gen.standard_normal((3, pool_size))
    if matched:
        x = (x - x.mean()) / x.std()
        u = u / math.sqrt(np.mean(u * u))
        y -= (y @ u) / (u @ u) * u
        y /= math.sqrt(np.mean(y * y))
    eta_plus = m1 + math.sqrt(m3 - m1 * m1) * x
    m_bar = m2 * u + math.sqrt(m4 - m2 * m2) * y
    return DEPool(eta_plus, m_bar, u, params if isinstance(params, DEParams) else DEParams.of(params))


def pool_moments(pool: DEPool) -> MomentVector:
    if pool.pool_size == 0:
        raise ValueError("empty pool")
    e, m, u = pool.eta_plus, pool.m_bar, pool.u
    return MomentVector(float(e.mean()), float((u * m).mean()), float((e * e).mean()), float((m * m).mean()))


def pool_moment_cov(pool: DEPool) -> np.ndarray:
    """Monte Carlo covariance (4 x 4) of the pool moment estimates."""
    e, m, u = pool.eta_plus, pool.m_bar, pool.u
    return np.cov(np.stack([e, u * m, e * e, m * m])) / pool.pool_size


def pool_moment_se(pool: DEPool) -> np.ndarray:
    """Monte Carlo standard errors of the four pool moments."""
    return np.sqrt(np.diag(pool_moment_cov(pool)))


def de_step(pool: DEPool, seed: int) -> DEPool:
    n = pool.pool_size
    if n == 0:
        raise ValueError("empty pool")
    prm = pool.params
    lam, mu, gamma, d = prm.lam, prm.mu, prm.gamma, prm.d
    rate_plus = d / 2 + lam * math.sqrt(d) / 2
    rate_minus = d / 2 - lam * math.sqrt(d) / 2
    if rate_minus < 0:
        raise ParameterError(f"Poisson rate d/2 - lambda sqrt(d)/2 = {rate_minus:.3g} is negative")

    m1, m2, m3, m4 = pool_moments(pool)
    # V-marginal mean: half the pool with V=+1, half mirrored.
    mean_eta = 0.5 * pool.eta_plus.mean() + 0.5 * (-pool.eta_plus).mean()

    gen = rngmod.stream(seed, rngmod.DE_STEP, pool.step)
    u_new = gen.standard_normal(n)
    m_new = mu * m1 * u_new + math.sqrt(mu * m3) * gen.standard_normal(n)

    k_plus = gen.poisson(rate_plus, n)
    k_minus = gen.poisson(rate_minus, n)
    owner_p = np.repeat(np.arange(n), k_plus)
    owner_m = np.repeat(np.arange(n), k_minus)
    draw_p = pool.eta_plus[gen.integers(0, n, owner_p.size)]
    draw_m = -pool.eta_plus[gen.integers(0, n, owner_m.size)]
    tree = np.bincount(owner_p, weights=draw_p, minlength=n) + np.bincount(owner_m, weights=draw_m, minlength=n)
    eta_new = (
        (lam / math.sqrt(d)) * tree
        - lam * math.sqrt(d) * mean_eta
        + (mu / gamma) * m2
        + math.sqrt((mu / gamma) * m4) * gen.standard_normal(n)
    )
    return DEPool(eta_new, m_new, u_new, prm, pool.step + 1)


def moment_map(m, params, form: str = "exact") -> MomentVector:
    """Closed-form image of the moment vector under one DE step.

    ``form="exact"`` is the full second-moment recursion of the DE map,
    including the squared-mean contribution ``lam^4 z1^2`` of the Poisson sum
    and the cross term ``2 lam^2 (mu/gamma) z1 z2``.  ``form="display"``
    evaluates the shorter quadratic form that drops ``lam^4 z1^2`` and uses
    ``2 lam^2 / gamma`` for the cross coefficient.  Both share the same
    linearisation at zero.
    """
    z1, z2, z3, z4 = (float(x) for x in m)
    lam2, mu, g = params.lam ** 2, params.mu, params.gamma
    phi1 = lam2 * z1 + (mu / g) * z2
    phi2 = mu * z1
    phi4 = mu * mu * z1 * z1 + mu * z3
    if form == "exact":
        phi3 = phi1 * phi1 + lam2 * z3 + (mu / g) * z4
    elif form == "display":
        phi3 = (mu / g) ** 2 * z2 * z2 + (2 * lam2 / g) * z1 * z2 + lam2 * z3 + (mu / g) * z4
    else:
        raise ValueError(f"unknown form {form!r}")
    return MomentVector(phi1, phi2, phi3, phi4)


def moment_jacobian(params) -> np.ndarray:
    """Jacobian of :func:`moment_map` at the zero moment vector."""
    lam2, mu, g = params.lam ** 2, params.mu, params.gamma
    return np.array([
        [lam2, mu / g, 0.0, 0.0],
        [mu, 0.0, 0.0, 0.0],
        [0.0, 0.0, lam2, mu / g],
        [0.0, 0.0, mu, 0.0],
    ])


def moment_map_jacobian(m, params) -> np.ndarray:
    """Jacobian of the exact :func:`moment_map` at ``m``."""
    z1 = float(m[0])
    lam2, mu, g = params.lam ** 2, params.mu, params.gamma
    J = moment_jacobian(params)
    phi1 = moment_map(m, params).m1
    J[2] += 2.0 * phi1 * J[0]
    J[3, 0] += 2.0 * mu * mu * z1
    return J


def jacobian_radius(lam: float, mu: float, gamma: float) -> float:
    """Spectral radius of the linearised moment map: largest root of
    ``z^2 - lam^2 z - mu^2/gamma``."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    a = lam * lam
    disc = math.sqrt(a * a + 4.0 * mu * mu / gamma)
    return max(abs((a + disc) / 2.0), abs((a - disc) / 2.0))


@dataclass
class DETrajectory:
    moments: list
    cov: list

    @property
    def se(self) -> list:
        return [np.sqrt(np.diag(c)) for c in self.cov]

    def propagated_se(self, params) -> list:
        """Standard errors of the step-``t`` moments around the closed-form
        trajectory started at ``moments[0]``.

        Each step adds fresh sampling noise and maps the noise carried from
        the previous step through the moment-map Jacobian.  The starting
        moments are taken as exact (the reference trajectory starts there).
        """
        m = self.moments[0]
        acc = np.zeros((4, 4))
        out = [np.zeros(4)]
        for c in self.cov[1:]:
            J = moment_map_jacobian(m, params)
            acc = J @ acc @ J.T + c
            m = moment_map(m, params)
            out.append(np.sqrt(np.diag(acc)))
        return out


def de_run(params, init, t_max: int, pool_size: int = 100_000, seed: int = 0) -> DETrajectory:
    """Iterate population dynamics and record the pool moments at every step.

    ``init`` is either a :class:`DEPool` or a moment 4-vector (turned into a
    moment-matched Gaussian pool).
    """
    if t_max < 1:
        raise ValueError("t_max must be >= 1")
    pool = init if isinstance(init, DEPool) else init_pool(params, init, pool_size, seed)
    moments, cov = [pool_moments(pool)], [pool_moment_cov(pool)]
    for _ in range(t_max):
        pool = de_step(pool, seed)
        moments.append(pool_moments(pool))
        cov.append(pool_moment_cov(pool))
    return DETrajectory(moments, cov)
