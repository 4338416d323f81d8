"""Closed-form asymptotics: threshold, deformed-GOE limits, and the
large-n value of the combined spectral statistic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def g_fn(kappa: float, sigma2: float) -> float:
    """Half the limiting top eigenvalue of ``kappa v v^T + GOE(sigma^2)``.

    ``kappa/2 + sigma^2/(2 kappa)`` above the transition (``kappa >= sigma``),
    ``sigma`` below it.  Negative ``kappa`` is rejected.
    """
    if kappa < 0:
        raise ValueError(f"kappa must be non-negative, got {kappa}")
    if sigma2 < 0:
        raise ValueError(f"sigma2 must be non-negative, got {sigma2}")
    if kappa == 0:
        return math.sqrt(sigma2)
    if kappa * kappa >= sigma2:
        return kappa / 2 + sigma2 / (2 * kappa)
    return math.sqrt(sigma2)


def g_prime(kappa: float, sigma2: float) -> float:
    """``d g_fn / d kappa``; half the limiting squared overlap of the top eigenvector."""
    if kappa < 0:
        raise ValueError(f"kappa must be non-negative, got {kappa}")
    if sigma2 < 0:
        raise ValueError(f"sigma2 must be non-negative, got {sigma2}")
    if sigma2 == 0:
        return 0.5
    if kappa * kappa > sigma2:
        return 0.5 - sigma2 / (2 * kappa * kappa)
    return 0.0


def threshold(lam: float, mu: float, gamma: float) -> bool:
    """``True`` iff ``lam^2 + mu^2/gamma > 1`` (weak recovery predicted)."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    return lam * lam + mu * mu / gamma > 1.0


@dataclass(frozen=True)
class ComparisonParams:
    lam: float
    mu: float
    gamma: float
    b: float
    rho: float = 1.0
    tau: float = 1.0

    def __post_init__(self):
        if self.rho <= 0 or self.tau <= 0:
            raise ValueError("rho and tau must be positive")
        if self.b < 0:
            raise ValueError("b must be non-negative")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")

    @classmethod
    def for_statistic(cls, lam: float, mu: float, gamma: float) -> "ComparisonParams":
        """Unit noise scales and ``b = b_star sqrt(gamma)``, the instantiation
        whose optimum is the large-n value of ``min_xi lambda_max(M(xi))``."""
        b = 2.0 * mu / (lam * gamma) * math.sqrt(gamma)
        return cls(lam, mu, gamma, b)


def _objective(cp: ComparisonParams, t: float) -> float:
    s1 = 4 * cp.rho + cp.b ** 2 * cp.tau
    s2 = cp.b ** 2 * cp.gamma * cp.tau
    return g_fn(2 * cp.lam + cp.b * cp.mu * t, s1) + g_fn(cp.b / t, s2) / cp.gamma


def _slope(cp: ComparisonParams, t: float) -> float:
    s1 = 4 * cp.rho + cp.b ** 2 * cp.tau
    s2 = cp.b ** 2 * cp.gamma * cp.tau
    return (cp.b * cp.mu * g_prime(2 * cp.lam + cp.b * cp.mu * t, s1)
            - cp.b / (cp.gamma * t * t) * g_prime(cp.b / t, s2))


def _g_vec(kappa: np.ndarray, sigma2: float) -> np.ndarray:
    sigma = math.sqrt(sigma2)
    with np.errstate(divide="ignore", invalid="ignore"):
        upper = kappa / 2 + sigma2 / (2 * kappa)
    return np.where((kappa > 0) & (kappa >= sigma), upper, sigma)


def _objective_vec(cp: ComparisonParams, t: np.ndarray) -> np.ndarray:
    s1 = 4 * cp.rho + cp.b ** 2 * cp.tau
    s2 = cp.b ** 2 * cp.gamma * cp.tau
    return _g_vec(2 * cp.lam + cp.b * cp.mu * t, s1) + _g_vec(cp.b / t, s2) / cp.gamma


def null_opt(cp: ComparisonParams) -> float:
    """Pure-noise optimum ``sqrt(4 rho + b^2 tau) + b sqrt(tau/gamma)``."""
    return math.sqrt(4 * cp.rho + cp.b ** 2 * cp.tau) + cp.b * math.sqrt(cp.tau / cp.gamma)


@dataclass
class OptResult:
    value: float
    t_star: float
    boundary: bool


def predicted_opt(cp: ComparisonParams, t_lo: float = 1e-6, t_hi: float = 1e6,
                  grid: int = 200) -> OptResult:
    """Minimise ``G(2 lam + b mu t, 4 rho + b^2 tau) + G(b/t, b^2 gamma tau)/gamma`` over ``t``.

    A log-spaced grid locates the basin, golden-section refines it.  The
    objective is convex in ``t`` but may be flat over an interval; ``t_star``
    is then the smallest minimiser, found by bisection on the sign of the
    derivative.
    """
    if cp.b == 0:
        s1 = 4 * cp.rho
        return OptResult(g_fn(2 * cp.lam, s1), float("nan"), False)
    ts = np.geomspace(t_lo, t_hi, grid)
    vals = _objective_vec(cp, ts)
    k = int(np.argmin(vals))
    a = ts[max(k - 1, 0)]
    b = ts[min(k + 1, grid - 1)]
    x1 = b - INV_PHI * (b - a)
    x2 = a + INV_PHI * (b - a)
    f1, f2 = _objective(cp, x1), _objective(cp, x2)
    for _ in range(200):
        if b - a <= 1e-12 * b:
            break
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - INV_PHI * (b - a)
            f1 = _objective(cp, x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + INV_PHI * (b - a)
            f2 = _objective(cp, x2)
    value = min(f1, f2, vals[k])

    # smallest point where the (monotone) derivative becomes non-negative
    lo = ts[max(k - 1, 0)]
    hi = ts[min(k + 1, grid - 1)]
    if _slope(cp, lo) >= 0:
        t_star = lo
    elif _slope(cp, hi) < 0:
        t_star = hi
    else:
        for _ in range(200):
            mid = math.sqrt(lo * hi)
            if _slope(cp, mid) >= 0:
                hi = mid
            else:
                lo = mid
            if hi - lo <= 1e-15 * hi:
                break
        t_star = hi
    boundary = k == 0 or k == grid - 1
    return OptResult(min(value, _objective(cp, t_star)), t_star, boundary)


def supercriticality_check(lam: float, mu: float, gamma: float) -> bool:
    """``True`` iff the optimiser ``t*`` of the comparison formula (unit noise,
    ``b = b_star sqrt(gamma)``) sits on the informative branch ``G' > 0``."""
    if lam <= 0 or mu <= 0:
        raise ValueError("supercriticality_check needs lambda, mu > 0")
    cp = ComparisonParams.for_statistic(lam, mu, gamma)
    res = predicted_opt(cp)
    return g_prime(2 * lam + cp.b * mu * res.t_star, 4 + cp.b ** 2) > 0


def stationarity_residual(cp: ComparisonParams, t: float) -> float:
    return _slope(cp, t)
