"""Overlap metrics and run summaries."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np


def overlap(v_hat, v) -> float:
    """Normalised overlap ``|<v_hat, v>| / n``.

    ``v_hat`` is rescaled to norm ``sqrt(n)`` first, so sign vectors and real
    spectral estimates are on the same scale.
    """
    v_hat = np.asarray(v_hat, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if v_hat.shape != v.shape:
        raise ValueError(f"shape mismatch: {v_hat.shape} vs {v.shape}")
    norm = np.linalg.norm(v_hat)
    if norm == 0:
        raise ValueError("overlap of a zero estimate is undefined")
    n = v.size
    val = abs(float(v_hat @ v)) * np.sqrt(n) / (norm * n)
    return float(min(val, 1.0))


def covariate_overlap(u_hat, u) -> float:
    """Absolute cosine similarity between ``u_hat`` and ``u``."""
    u_hat = np.asarray(u_hat, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    nu, nh = np.linalg.norm(u), np.linalg.norm(u_hat)
    if nu == 0 or nh == 0:
        raise ValueError("covariate overlap with a zero vector is undefined")
    return min(abs(float(u_hat @ u)) / (nu * nh), 1.0)


@dataclass
class RunSummary:
    algorithm: str
    params: dict
    seed: int
    overlap: float
    cov_overlap: float
    decision: str  # "reject" or "accept"
    wall_time: float = 0.0
    trace: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def to_json_dict(self, *, timing: bool = False) -> dict:
        out = asdict(self)
        out.pop("trace")
        if not timing:
            out.pop("wall_time")
        return out
