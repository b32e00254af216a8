"""Random streams, input variates and Latin Hypercube plans."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


def make_rng(seed) -> np.random.Generator:
    """Return a generator from an int, a SeedSequence or an existing generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def spawn(rng: np.random.Generator, n: int = 1) -> list[np.random.Generator]:
    """Independent child streams of ``rng``.

    Children are derived from the generator's seed sequence, so the result
    only depends on how many children were spawned before, not on how many
    numbers the parent has produced.
    """
    return rng.spawn(n)


@dataclass(frozen=True)
class Variate:
    family: str  # "normal" | "gamma"
    mean: float
    dispersion: float  # std for normal, coefficient of variation for gamma

    def __post_init__(self):
        if self.family not in ("normal", "gamma"):
            raise ValueError(f"unknown family {self.family!r}")
        if self.dispersion < 0:
            raise ValueError("dispersion must be non-negative")
        if self.family == "gamma" and (self.mean <= 0 or self.dispersion <= 0):
            raise ValueError("gamma variates need mean > 0 and CoV > 0")

    @property
    def std(self) -> float:
        if self.family == "normal":
            return self.dispersion
        return self.mean * self.dispersion

    @property
    def gamma_shape(self) -> float:
        return 1.0 / self.dispersion**2

    @property
    def gamma_scale(self) -> float:
        return self.mean * self.dispersion**2


class RandomSpec(tuple):
    """Independent per-dimension variates of the stochastic input vector."""

    def __new__(cls, variates: Sequence[Variate]):
        return super().__new__(cls, tuple(variates))

    @classmethod
    def normal(cls, n_x: int, mean: float = 1.0, std: float = 0.0) -> "RandomSpec":
        return cls([Variate("normal", mean, std)] * n_x)

    @property
    def n_x(self) -> int:
        return len(self)

    @property
    def means(self) -> np.ndarray:
        return np.array([v.mean for v in self], dtype=float)


def draw(spec: RandomSpec, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw one input vector (or ``size`` of them, stacked as rows).

    Gamma variates are moment matched: shape ``1/CoV**2`` and scale
    ``mean*CoV**2`` give the requested mean and standard deviation.
    """
    n = 1 if size is None else size
    out = np.empty((n, len(spec)))
    for j, v in enumerate(spec):
        if v.family == "normal":
            if v.dispersion == 0:
                out[:, j] = v.mean
            else:
                out[:, j] = rng.normal(v.mean, v.dispersion, size=n)
        else:
            out[:, j] = rng.gamma(v.gamma_shape, v.gamma_scale, size=n)
    return out[0] if size is None else out


@dataclass(frozen=True)
class DesignSpace:
    lower: np.ndarray
    upper: np.ndarray

    def __init__(self, lower, upper):
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        if lower.shape != upper.shape:
            raise ValueError("lower and upper bounds differ in length")
        if not np.all(lower < upper):
            raise ValueError("every lower bound must be below its upper bound")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def n(self) -> int:
        return self.lower.size

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def contains(self, d, tol: float = 0.0) -> bool:
        d = np.asarray(d, dtype=float)
        return bool(np.all(d >= self.lower - tol) and np.all(d <= self.upper + tol))


def lhs_plan(n_points: int, n_dims: int, rng: np.random.Generator) -> np.ndarray:
    """Latin Hypercube plan in the open unit hypercube.

    Each column is an independent random permutation of the strata, with the
    point jittered uniformly inside its stratum.
    """
    if n_points < 1 or n_dims < 1:
        raise ValueError("n_points and n_dims must be positive")
    plan = np.empty((n_points, n_dims))
    for j in range(n_dims):
        strata = rng.permutation(n_points)
        u = rng.uniform(size=n_points)
        # keep strictly inside (0, 1)
        u = np.clip(u, 1e-12, 1 - 1e-12)
        plan[:, j] = (strata + u) / n_points
    return plan
