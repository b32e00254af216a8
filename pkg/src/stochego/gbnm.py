"""Globalized bounded Nelder-Mead: simplex searches restarted away from past starts.

Restart points are drawn where a Gaussian Parzen-window estimate built
on previous starts and local optima is lowest.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .mci import BatchSchedule, integrate_to_target
from .sampling import make_rng
from .sego import RunReport, TraceRow, denormalize

log = logging.getLogger(__name__)


class BudgetExhausted(Exception):
    """Raised by an objective wrapper when no evaluations are left."""


@dataclass
class GbnmConfig:
    nfe_budget: int = 150
    beta_o: float = 0.01
    n_candidates: int = 10
    nr_max: int = 20
    tol: float = 1e-3
    initial_step: float = 0.1
    max_local_evals: int | None = None
    schedule: BatchSchedule = field(default_factory=BatchSchedule)
    seed: int = 0


@dataclass
class SearchHistory:
    points: list = field(default_factory=list)

    @property
    def M(self) -> int:
        return len(self.points)

    def add(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(s < 0) or np.any(s > 1):
            raise ValueError("history points live in the unit hypercube")
        self.points.append(s.copy())


def _project(x):
    return np.clip(x, 0.0, 1.0)


def nelder_mead_bounded(f, start, tol: float = 1e-3, max_eval: int = 1000,
                        step: float = 0.1, space=None):
    """Nelder-Mead with every trial vertex projected onto the box.

    Works on the unit hypercube unless a ``space`` with ``lower``/``upper``
    is given. Returns ``(point, value, evals)``; stops when the simplex
    diameter drops below ``tol`` or after ``max_eval`` calls of ``f``.
    """
    lower = np.zeros(np.size(start)) if space is None else np.asarray(space.lower, float)
    upper = np.ones(np.size(start)) if space is None else np.asarray(space.upper, float)
    width = upper - lower

    def proj(x):
        return np.clip(x, lower, upper)

    start = proj(np.asarray(start, dtype=float))
    n = start.size
    evals = 0

    def call(x):
        nonlocal evals
        evals += 1
        return float(f(x))

    simplex = [start]
    for i in range(n):
        v = start.copy()
        v[i] += step * width[i]
        if v[i] > upper[i]:
            v[i] = start[i] - step * width[i]
        simplex.append(proj(v))
    simplex = np.array(simplex)
    if max_eval < n + 1:
        # not enough evaluations for a full simplex: score what we can
        values = np.array([call(v) for v in simplex[:max(max_eval, 1)]])
        k = int(np.argmin(values))
        return simplex[k].copy(), float(values[k]), evals
    values = np.array([call(v) for v in simplex])

    while evals < max_eval:
        order = np.argsort(values, kind="stable")
        simplex, values = simplex[order], values[order]
        diam = np.max(np.abs(simplex[1:] - simplex[0]) / width)
        if diam < tol:
            break
        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        xr = proj(centroid + (centroid - worst))
        fr = call(xr)
        if fr < values[0]:
            if evals >= max_eval:
                simplex[-1], values[-1] = xr, fr
                continue
            xe = proj(centroid + 2.0 * (centroid - worst))
            fe = call(xe)
            simplex[-1], values[-1] = (xe, fe) if fe < fr else (xr, fr)
        elif fr < values[-2]:
            simplex[-1], values[-1] = xr, fr
        else:
            if evals >= max_eval:
                break
            if fr < values[-1]:
                xc = proj(centroid + 0.5 * (xr - centroid))
            else:
                xc = proj(centroid + 0.5 * (worst - centroid))
            fc = call(xc)
            if fc < min(fr, values[-1]):
                simplex[-1], values[-1] = xc, fc
            else:
                for i in range(1, n + 1):
                    if evals >= max_eval:
                        break
                    simplex[i] = proj(simplex[0] + 0.5 * (simplex[i] - simplex[0]))
                    values[i] = call(simplex[i])
    k = int(np.argmin(values))
    return simplex[k].copy(), float(values[k]), evals


def parzen_density(history: SearchHistory, s, beta_o: float) -> float:
    """Mean of Gaussian kernels centred on the history points.

    Coordinates are normalized, so each kernel variance is ``beta_o``.
    An empty history has density 0.
    """
    if history.M == 0:
        return 0.0
    s = np.asarray(s, dtype=float)
    pts = np.array(history.points)
    n = s.size
    sq = np.sum((pts - s) ** 2, axis=1)
    norm_const = (2 * np.pi * beta_o) ** (-n / 2)
    return float(norm_const * np.mean(np.exp(-0.5 * sq / beta_o)))


def restart_point(history: SearchHistory, n_candidates: int, beta_o: float,
                  rng: np.random.Generator, n_dims: int | None = None) -> np.ndarray:
    """Least-visited of ``n_candidates`` uniform points."""
    if n_candidates < 1:
        raise ValueError("need at least one candidate")
    n = n_dims if n_dims is not None else np.size(history.points[0])
    cand = rng.uniform(size=(n_candidates, n))
    if history.M == 0:
        return cand[0]
    dens = [parzen_density(history, c, beta_o) for c in cand]
    return cand[int(np.argmin(dens))]


def run_gbnm(problem, matched_target: float, config: GbnmConfig, rng=None) -> RunReport:
    """GBNM where every objective query is an MCI estimate driven to ``matched_target``."""
    root = make_rng(config.seed if rng is None else rng)
    restart_rng, eval_root = root.spawn(2)
    space = problem.space
    n = problem.n
    nfe0 = problem.nfe
    trace: list[TraceRow] = []
    best = {"value": np.inf, "design": None, "rec": None}
    history = SearchHistory()
    max_local = config.max_local_evals or 200 * n

    def objective(u):
        remaining = config.nfe_budget - (problem.nfe - nfe0)
        if remaining <= 0:
            raise BudgetExhausted
        d = denormalize(u, space)
        rec = integrate_to_target(problem, d, matched_target, remaining,
                                  eval_root.spawn(1)[0], config.schedule)
        trace.append(TraceRow(len(trace), problem.nfe - nfe0, d.tolist(), 0, rec.lam,
                              rec.n_r, rec.mean, rec.err_var, float("nan"),
                              exhausted=rec.exhausted))
        if rec.mean < best["value"] and not rec.exhausted:
            best.update(value=rec.mean, design=d, rec=rec)
        if rec.exhausted:
            raise BudgetExhausted
        return rec.mean

    restarts = 0
    while restarts < config.nr_max and problem.nfe - nfe0 < config.nfe_budget:
        x0 = restart_point(history, config.n_candidates, config.beta_o, restart_rng, n_dims=n)
        history.add(x0)
        try:
            x_opt, _, _ = nelder_mead_bounded(objective, x0, tol=config.tol, max_eval=max_local,
                                              step=config.initial_step)
        except BudgetExhausted:
            break
        history.add(x_opt)
        restarts += 1

    if best["design"] is None:
        # budget ran out inside the first query; fall back to its partial estimate
        last = trace[-1]
        best.update(value=last.mean, design=np.asarray(last.point))
    return RunReport(best_design=np.asarray(best["design"]), best_estimate=float(best["value"]),
                     nfe_used=problem.nfe - nfe0, trace=trace, seed=config.seed, method="gbnm")
