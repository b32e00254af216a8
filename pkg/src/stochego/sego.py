"""Stochastic EGO driver with constant or adaptive target variance."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, asdict

import numpy as np

from . import kriging
from .adaptive import AdaptiveConfig, count_close, lambda_for
from .infill import effective_best, maximize_aei
from .mci import SampleRecord, integrate_to_target, single_evaluation
from .sampling import DesignSpace, lhs_plan, make_rng

log = logging.getLogger(__name__)


def normalize(d, space: DesignSpace, tol: float = 1e-12) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    if not space.contains(d, tol=tol * np.max(space.width)):
        raise ValueError(f"design {d} outside the design space")
    return (d - space.lower) / space.width


def denormalize(u, space: DesignSpace) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if np.any(u < -1e-12) or np.any(u > 1 + 1e-12):
        raise ValueError("normalized design outside the unit hypercube")
    return space.lower + np.clip(u, 0.0, 1.0) * space.width


@dataclass
class SegoConfig:
    nfe_budget: int = 150
    mode: str = "adaptive"  # "adaptive" | "constant"
    constant_target: float = 1e-3
    adaptive: AdaptiveConfig = field(default_factory=AdaptiveConfig)
    n_s_factor: int = 7
    alpha: float = 1.0
    search: kriging.SearchBudget = field(default_factory=kriging.SearchBudget)
    probes_per_dim: int = 200
    starts: int = 5
    merge_tol: float = 1e-9
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("adaptive", "constant"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "constant" and self.constant_target < self.adaptive.sigma2_min:
            raise ValueError("constant target below sigma2_min")


@dataclass
class TraceRow:
    iteration: int
    nfe_cum: int
    point: list
    n_close: int
    lam: float
    n_r: int
    mean: float
    err_var: float
    aei: float
    merged: bool = False
    exhausted: bool = False


@dataclass
class RunReport:
    best_design: np.ndarray
    best_estimate: float
    nfe_used: int
    trace: list
    seed: int
    method: str = "sego"
    flags: list = field(default_factory=list)
    final_model: object = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "method": self.method, "seed": self.seed, "nfe_used": self.nfe_used,
            "best_design": [float(v) for v in self.best_design],
            "best_estimate": float(self.best_estimate),
            "trace": [asdict(r) for r in self.trace], "flags": list(self.flags),
        }


def _fit(records, rng, search, warm, flags):
    X = np.array([r.design for r in records])
    y = np.array([r.mean for r in records])
    noise = np.array([r.noise for r in records])
    try:
        model = kriging.fit(X, y, noise, rng, search, warm=warm)
    except np.linalg.LinAlgError:
        flags.append("fit-failed")
        # a broad, well-conditioned fallback correlation
        model = kriging.build(X, y, noise + 1e-6 * max(np.var(y), 1e-12),
                              kriging.Hyperparameters(np.full(X.shape[1], 10.0)))
    if model.flagged:
        flags.append("nugget")
    return model


def run(problem, config: SegoConfig, rng=None) -> RunReport:
    """Minimize ``E[phi(d, X)]`` over the problem's box within ``config.nfe_budget`` calls."""
    root = make_rng(config.seed if rng is None else rng)
    plan_rng, eval_root, fit_rng, infill_rng = root.spawn(4)
    n = problem.n
    n_s = config.n_s_factor * n
    if config.nfe_budget <= n_s:
        raise ValueError(f"budget {config.nfe_budget} does not exceed the plan size {n_s}")
    ad = config.adaptive
    space = problem.space
    nfe0 = problem.nfe
    flags: list[str] = []

    records: list[SampleRecord] = []
    trace: list[TraceRow] = []
    for u in lhs_plan(n_s, n, plan_rng):
        rec = single_evaluation(problem, denormalize(u, space), ad.sigma2_target,
                                eval_root.spawn(1)[0])
        records.append(rec)
        trace.append(TraceRow(0, problem.nfe - nfe0, denormalize(u, space).tolist(), 0,
                              rec.lam, rec.n_r, rec.mean, rec.err_var, float("nan")))

    new_lam = ad.sigma2_target if config.mode == "adaptive" else config.constant_target
    warm = None
    iteration = 0
    while problem.nfe - nfe0 < config.nfe_budget:
        iteration += 1
        remaining = config.nfe_budget - (problem.nfe - nfe0)
        model = _fit(records, fit_rng, config.search, warm, flags)
        warm = model.hyper
        prop = maximize_aei(model, lambda P: np.full(len(P), new_lam), infill_rng,
                            alpha=config.alpha, probes_per_dim=config.probes_per_dim,
                            starts=config.starts)
        if prop.flat:
            flags.append(f"flat-aei@{iteration}")
        q = prop.point
        plan = np.array([r.design for r in records])
        n_close = count_close(plan, q, ad.r_hc)
        if config.mode == "constant":
            target = config.constant_target
        elif iteration == 1:
            target = ad.sigma2_target
        else:
            target = lambda_for("new-infill", n_close, n, ad)

        gaps = np.max(np.abs(plan - q), axis=1)
        j = int(np.argmin(gaps))
        merged = gaps[j] <= config.merge_tol
        stream = eval_root.spawn(1)[0]
        if merged:
            rec = integrate_to_target(problem, denormalize(records[j].design, space), target,
                                      remaining, stream, ad.schedule, start=records[j])
            records[j] = rec
        else:
            rec = integrate_to_target(problem, denormalize(q, space), target, remaining,
                                      stream, ad.schedule)
            records.append(rec)
        trace.append(TraceRow(iteration, problem.nfe - nfe0,
                               denormalize(rec.design, space).tolist(), n_close, rec.lam,
                               rec.n_r, rec.mean, rec.err_var, prop.aei_value,
                               merged=bool(merged), exhausted=rec.exhausted))

    model = _fit(records, fit_rng, config.search, warm, flags)
    best = effective_best(model, config.alpha)
    return RunReport(
        best_design=denormalize(records[best].design, space),
        best_estimate=records[best].mean,
        nfe_used=problem.nfe - nfe0,
        trace=trace,
        seed=config.seed,
        method=f"sego-{config.mode}",
        flags=flags,
        final_model=model,
    )
