"""Target-variance schedule driven by how crowded an infill's neighbourhood is."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .mci import BatchSchedule


@dataclass(frozen=True)
class AdaptiveConfig:
    sigma2_target: float = 1.0
    sigma2_min: float = 1e-6
    r_hc: float = 0.1
    a1: float = 0.5
    a2: float = 0.5
    a3: float = 0.5
    a4: float = 0.01
    schedule: BatchSchedule = field(default_factory=BatchSchedule)

    def __post_init__(self):
        if not (0 < self.sigma2_min <= self.sigma2_target):
            raise ValueError("need 0 < sigma2_min <= sigma2_target")
        if not (0 < self.r_hc < 1):
            raise ValueError("r_hc is a normalized radius in (0, 1)")


def count_close(plan, q, r_hc: float) -> int:
    """Number of plan points within max-norm distance ``r_hc`` of ``q`` (inclusive)."""
    plan = np.asarray(plan, dtype=float)
    if plan.size == 0:
        return 0
    plan = plan.reshape(-1, np.size(q))
    dist = np.max(np.abs(plan - np.asarray(q, dtype=float)), axis=1)
    return int(np.count_nonzero(dist <= r_hc))


def decay_exponent(n: int, n_close: int, config: AdaptiveConfig) -> float:
    return config.a1 + config.a2 * n + config.a3 * n_close - config.a4 * n_close * n


def adaptive_target(n: int, n_close: int, config: AdaptiveConfig) -> float:
    """``sigma2_target * exp(-g)`` clamped to ``[sigma2_min, sigma2_target]``."""
    value = config.sigma2_target * math.exp(-decay_exponent(n, n_close, config))
    return min(max(value, config.sigma2_min), config.sigma2_target)


def lambda_for(status: str, n_close: int, n: int, config: AdaptiveConfig) -> float:
    """Intrinsic noise level assigned to a point.

    ``status`` is ``"new-infill"`` or ``"in-plan"``. Isolated points and
    initial-plan points (``n_close == 0``) keep the initial target; points
    with neighbours get the decayed target.
    """
    if status not in ("new-infill", "in-plan"):
        raise ValueError(f"unknown point status {status!r}")
    if n_close <= 0:
        return config.sigma2_target
    return adaptive_target(n, n_close, config)
