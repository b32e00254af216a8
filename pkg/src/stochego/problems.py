"""Stochastic benchmark integrands and the problem container.

Every integrand takes a design ``d`` in original units and one input vector
``x`` (or a stack of them as rows) and returns the integrand value(s).
"""

from __future__ import annotations

import threading
from functools import partial
from typing import Callable, Optional

import numpy as np

from .sampling import DesignSpace, RandomSpec, Variate, draw


class StochasticProblem:
    """Design space, input distribution and integrand of ``J(d) = E[phi(d, X)]``.

    ``nfe`` counts integrand calls; it is the budget currency of every
    optimizer in the package.
    """

    def __init__(self, name: str, space: DesignSpace, random: RandomSpec,
                 phi: Callable, exact_mean: Optional[Callable] = None,
                 known_minimum: Optional[tuple] = None):
        self.name = name
        self.space = space
        self.random = random
        self._phi = phi
        self.exact_mean = exact_mean
        self.known_minimum = known_minimum
        self._nfe = 0
        self._lock = threading.Lock()

    @property
    def n(self) -> int:
        return self.space.n

    @property
    def n_x(self) -> int:
        return self.random.n_x

    @property
    def nfe(self) -> int:
        return self._nfe

    def reset_counter(self):
        with self._lock:
            self._nfe = 0

    def phi(self, d, x) -> np.ndarray | float:
        """Evaluate the integrand, counting one call per input row."""
        x = np.asarray(x, dtype=float)
        calls = 1 if x.ndim == 1 else x.shape[0]
        with self._lock:
            self._nfe += calls
        return self._phi(np.asarray(d, dtype=float), x)

    def sample(self, d, n: int, rng: np.random.Generator) -> np.ndarray:
        """``n`` integrand replications at ``d`` with fresh inputs from ``rng``."""
        x = draw(self.random, rng, size=n)
        return np.atleast_1d(np.asarray(self.phi(d, x), dtype=float))


# ---------------------------------------------------------------- 1D

def phi_1d(d, x):
    d = float(np.asarray(d).reshape(-1)[0])
    x = np.asarray(x, dtype=float)
    return -(1.4 - 3.0 * d) * np.sin(18.0 * d) * x[..., 0]


def mean_1d(d):
    d = np.asarray(d, dtype=float)
    if d.ndim > 0:
        d = d[..., 0]
    return -(1.4 - 3.0 * d) * np.sin(18.0 * d)


def multimodal_1d(sigma_x: float = 0.1) -> StochasticProblem:
    return StochasticProblem(
        "1d", DesignSpace([0.0], [1.2]), RandomSpec.normal(1, 1.0, sigma_x),
        phi_1d, exact_mean=mean_1d)


# ---------------------------------------------------------------- Branin

BRANIN_P = (1.0, 5.1 / (4 * np.pi**2), 5.0 / np.pi, 6.0, 10.0, 1.0 / (8 * np.pi))


def phi_branin_tilted(d, x):
    p1, p2, p3, p4, p5, p6 = BRANIN_P
    d1, d2 = np.asarray(d, dtype=float)[..., 0], np.asarray(d, dtype=float)[..., 1]
    x = np.asarray(x, dtype=float)
    return (p1 * (d2 - p2 * d1**2 + p3 * d1 - p4) ** 2 * x[..., 0]
            + p5 * (1 - p6) * np.cos(d1) * x[..., 1] + p5 + 5.0 * d1)


def mean_branin_tilted(d):
    return phi_branin_tilted(d, np.ones(2))


def branin_tilted(sigma_x: float = 0.01) -> StochasticProblem:
    return StochasticProblem(
        "branin", DesignSpace([-5.0, 0.0], [10.0, 15.0]), RandomSpec.normal(2, 1.0, sigma_x),
        phi_branin_tilted, exact_mean=mean_branin_tilted)


# ---------------------------------------------------------------- Hartman 6

HARTMAN_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])
HARTMAN_A = np.array([
    [10, 3, 17, 3.50, 1.7, 8],
    [0.05, 10, 17, 0.1, 8, 14],
    [3, 3.5, 1.7, 10, 17, 8],
    [17, 8, 0.05, 10, 0.1, 14],
])
HARTMAN_P = 1e-4 * np.array([
    [1312, 1696, 5569, 124, 8283, 5886],
    [2329, 4135, 8307, 3736, 1004, 9991],
    [2348, 1451, 3522, 2883, 3047, 6650],
    [4047, 8828, 8732, 5743, 1091, 381],
])


def phi_hartman6(d, x, case: int = 1):
    """Hartman-6 with multiplicative noise.

    Case 1 takes 6 multipliers on the design coordinates. Case 2 takes 54:
    the 6 design multipliers, then 24 multipliers of ``A`` and 24 of ``P``
    (both row-major).
    """
    d = np.asarray(d, dtype=float)
    x = np.asarray(x, dtype=float)
    expected = 6 if case == 1 else 54
    if x.shape[-1] != expected:
        raise ValueError(f"case {case} needs {expected} multipliers, got {x.shape[-1]}")
    dx = d * x[..., :6]  # (..., 6)
    if case == 1:
        A, P = HARTMAN_A, HARTMAN_P
    else:
        A = HARTMAN_A * x[..., 6:30].reshape(x.shape[:-1] + (4, 6))
        P = HARTMAN_P * x[..., 30:54].reshape(x.shape[:-1] + (4, 6))
    inner = np.sum(A * (dx[..., None, :] - P) ** 2, axis=-1)
    return -np.sum(HARTMAN_ALPHA * np.exp(-inner), axis=-1)


def hartman6(sigma_x: float = 0.05, case: int = 1, sigma_a: float = 0.01,
             sigma_p: float = 0.01) -> StochasticProblem:
    variates = [Variate("normal", 1.0, sigma_x)] * 6
    if case == 2:
        variates += [Variate("normal", 1.0, sigma_a)] * 24 + [Variate("normal", 1.0, sigma_p)] * 24
    name = "hartman6" if case == 1 else "hartman6-hd"
    return StochasticProblem(
        name, DesignSpace(np.zeros(6), np.ones(6)), RandomSpec(variates),
        partial(phi_hartman6, case=case))


# ---------------------------------------------------------------- Levy 10

def phi_levy10(d, x):
    d = np.asarray(d, dtype=float)
    x = np.asarray(x, dtype=float)
    p = 1.0 + d * x / 4.0
    head = np.sin(np.pi * p[..., 0]) ** 2
    body = np.sum((p[..., :-1] - 1) ** 2 * (1 + 10 * np.sin(np.pi * p[..., :-1] + 1) ** 2), axis=-1)
    tail = (p[..., -1] - 1) ** 2 * (1 + np.sin(2 * np.pi * p[..., -1]) ** 2)
    return head + body + tail


def levy10(sigma_x: float = 0.01) -> StochasticProblem:
    return StochasticProblem(
        "levy10", DesignSpace(-10 * np.ones(10), 10 * np.ones(10)),
        RandomSpec.normal(10, 1.0, sigma_x), phi_levy10,
        known_minimum=(np.zeros(10), 0.0))


# ---------------------------------------------------------------- registry

def make_problem(name: str, sigma_x: Optional[float] = None, **kwargs) -> StochasticProblem:
    """Build a problem by its registry name."""
    if name == "1d":
        return multimodal_1d(0.1 if sigma_x is None else sigma_x)
    if name == "branin":
        return branin_tilted(0.01 if sigma_x is None else sigma_x)
    if name == "hartman6":
        return hartman6(0.05 if sigma_x is None else sigma_x, case=1)
    if name == "hartman6-hd":
        return hartman6(0.05 if sigma_x is None else sigma_x, case=2)
    if name == "levy10":
        return levy10(0.01 if sigma_x is None else sigma_x)
    if name == "tmd":
        from .tmd import tmd_problem
        return tmd_problem(**kwargs)
    raise KeyError(f"unknown problem {name!r}")


PROBLEMS = ("1d", "branin", "hartman6", "hartman6-hd", "levy10", "tmd")
