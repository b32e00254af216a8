"""Monte Carlo estimates of ``J(d)`` with error-variance control."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np


def estimate_mean(values) -> float:
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise ValueError("cannot average an empty sample")
    return float(values.mean())


def estimate_err_var(values) -> float:
    """Variance of the sample mean, ``sum((v - mean)**2) / (n (n - 1))``."""
    values = np.asarray(values, dtype=float).ravel()
    n = values.size
    if n < 2:
        raise ValueError("need at least two replications for an error variance")
    return float(np.sum((values - values.mean()) ** 2) / (n * (n - 1)))


@dataclass(frozen=True)
class BatchSchedule:
    """Replication growth: ``initial`` first, then +``growth`` of the current count."""

    initial: int = 4
    growth: float = 0.5

    def next_batch(self, n_r: int) -> int:
        if n_r < self.initial:
            return max(self.initial - n_r, math.ceil(self.growth * n_r), 1)
        return max(math.ceil(self.growth * n_r), 1)


@dataclass(frozen=True, eq=False)
class SampleRecord:
    """Replication statistics at one design point.

    ``design`` is in normalized coordinates. Statistics are kept as count,
    running mean and centred sum of squares so that pooling is exact.
    """

    design: np.ndarray
    n_r: int = 0
    mean: float = float("nan")
    m2: float = 0.0
    lam: float = float("nan")
    exhausted: bool = False

    @property
    def sum(self) -> float:
        return self.n_r * self.mean

    @property
    def sum_sq(self) -> float:
        return self.m2 + self.n_r * self.mean**2

    @property
    def err_var(self) -> float:
        if self.n_r < 2:
            return float("nan")
        return max(self.m2, 0.0) / (self.n_r * (self.n_r - 1))

    @property
    def noise(self) -> float:
        """Intrinsic variance used by the surrogate for this point."""
        if self.exhausted and self.n_r >= 2:
            return max(self.lam, self.err_var)
        return self.lam

    def extended(self, values) -> "SampleRecord":
        values = np.asarray(values, dtype=float).ravel()
        if values.size == 0:
            return self
        nb = values.size
        mb = float(values.mean())
        m2b = float(np.sum((values - mb) ** 2))
        if self.n_r == 0:
            return replace(self, n_r=nb, mean=mb, m2=m2b)
        n = self.n_r + nb
        delta = mb - self.mean
        mean = self.mean + delta * nb / n
        m2 = self.m2 + m2b + delta**2 * self.n_r * nb / n
        return replace(self, n_r=n, mean=mean, m2=m2)


def merge(existing: SampleRecord, values, new_target: float, design=None) -> SampleRecord:
    """Pool additional replications into ``existing``; the noise level only goes down."""
    if design is not None and not np.allclose(np.asarray(design, dtype=float), existing.design,
                                              rtol=0.0, atol=1e-9):
        raise ValueError("cannot merge replications of different design points")
    rec = existing.extended(values)
    lam = new_target if np.isnan(existing.lam) else min(existing.lam, new_target)
    return replace(rec, lam=lam)


def integrate_to_target(problem, d, target: float, budget: int, rng: np.random.Generator,
                        schedule: BatchSchedule | None = None,
                        start: SampleRecord | None = None) -> SampleRecord:
    """Replicate ``phi`` at ``d`` (original units) until the error variance reaches ``target``.

    Batches follow ``schedule`` and are truncated to the remaining ``budget``,
    so the budget is never exceeded. If it runs out first the record comes
    back with ``exhausted=True`` and whatever variance was reached. When
    ``start`` is given its replications are reused and at least one new
    batch is drawn.
    """
    schedule = schedule or BatchSchedule()
    if start is None:
        if budget < 1:
            raise ValueError("no budget left for a single evaluation")
        rec = SampleRecord(design=_normalize(problem, d), lam=target)
    else:
        rec = replace(start, lam=target if np.isnan(start.lam) else min(start.lam, target),
                      exhausted=False)
    spent = 0
    while True:
        done = rec.n_r >= 2 and rec.err_var <= target
        if done and (start is None or spent > 0):
            break
        remaining = budget - spent
        if remaining <= 0:
            if not done:
                rec = replace(rec, exhausted=True)
            break
        batch = min(schedule.next_batch(rec.n_r), remaining)
        rec = rec.extended(problem.sample(d, batch, rng))
        spent += batch
    return rec


def single_evaluation(problem, d, lam: float, rng: np.random.Generator) -> SampleRecord:
    """One replication, used for the initial plan; ``lam`` is assigned externally."""
    rec = SampleRecord(design=_normalize(problem, d), lam=lam)
    return rec.extended(problem.sample(d, 1, rng))


def _normalize(problem, d) -> np.ndarray:
    space = problem.space
    return (np.asarray(d, dtype=float) - space.lower) / space.width
