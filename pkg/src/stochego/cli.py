"""Experiment runner: seeded independent runs, CSV traces and a JSON summary.

Config files are JSON objects. Recognised keys (all optional except
``problem``)::

    experiment   name of the output sub-directory (default: problem-method)
    problem      1d | branin | hartman6 | hartman6-hd | levy10 | tmd
    sigma_x      input noise level for the analytic problems
    barrier      h300 | h400 | h500 (tmd only)
    tmd_random   draw the TMD mass as an extra variate (tmd only, default true)
    method       sego-adaptive | sego-constant | gbnm, or a list of them
    nfe          evaluation budget per run
    runs         number of independent runs
    seed         base seed; run i uses seed + i
    out          output directory
    workers      process-pool size
    sego         {constant_target, n_s_factor, alpha, probes_per_dim, starts,
                  particles, iterations}
    adaptive     {sigma2_target, sigma2_min, r_hc, a1, a2, a3, a4}
    gbnm         {matched_target, beta_o, n_candidates, nr_max, tol}

When several methods are listed they share run seeds, so run ``i`` starts
from the same initial sampling plan under every sEGO variant.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import logging
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .adaptive import AdaptiveConfig
from .gbnm import GbnmConfig, run_gbnm
from .kriging import SearchBudget
from .problems import PROBLEMS, make_problem
from .sego import SegoConfig, run

log = logging.getLogger(__name__)

METHODS = ("sego-adaptive", "sego-constant", "gbnm")
PERCENTILE_CONVENTION = "linear interpolation between order statistics (numpy 'linear')"

DEFAULTS = {
    "experiment": None,
    "problem": "1d",
    "sigma_x": None,
    "barrier": "h400",
    "tmd_random": True,
    "method": "sego-adaptive",
    "nfe": 150,
    "runs": 1,
    "seed": 0,
    "out": "results",
    "workers": 1,
    "sego": {},
    "adaptive": {},
    "gbnm": {"matched_target": 1e-3},
}


def percentiles(values, q):
    """Empirical percentile(s) with linear interpolation between order statistics."""
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise ValueError("percentile of an empty sample")
    out = np.percentile(values, q, method="linear")
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class ExperimentConfig:
    problem: str = "1d"
    method: str = "sego-adaptive"
    nfe: int = 150
    runs: int = 1
    seed: int = 0
    sigma_x: float | None = None
    barrier: str = "h400"
    tmd_random: bool = True
    experiment: str | None = None
    out: str = "results"
    workers: int = 1
    sego: dict = field(default_factory=dict)
    adaptive: dict = field(default_factory=dict)
    gbnm: dict = field(default_factory=lambda: {"matched_target": 1e-3})

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be at least 1")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.problem not in PROBLEMS:
            raise ValueError(f"unknown problem {self.problem!r}")
        if self.experiment is None:
            self.experiment = f"{self.problem}-{self.method}"

    def to_dict(self) -> dict:
        return {k: copy.deepcopy(getattr(self, k)) for k in self.__dataclass_fields__}

    def build_problem(self):
        if self.problem == "tmd":
            return make_problem("tmd", barrier=self.barrier, tmd_random=self.tmd_random)
        return make_problem(self.problem, self.sigma_x)

    def sego_config(self, seed: int) -> SegoConfig:
        s = dict(self.sego)
        search = SearchBudget(particles=s.pop("particles", 40), iterations=s.pop("iterations", 50))
        return SegoConfig(nfe_budget=self.nfe, mode=self.method.split("-")[1],
                          adaptive=AdaptiveConfig(**self.adaptive), search=search, seed=seed, **s)

    def gbnm_config(self, seed: int) -> tuple[float, GbnmConfig]:
        g = dict(self.gbnm)
        target = g.pop("matched_target", 1e-3)
        return target, GbnmConfig(nfe_budget=self.nfe, seed=seed, **g)


@dataclass
class Summary:
    best_values: list
    best_exact: list | None
    mean: float
    percentile_5: float
    percentile_95: float
    mean_nfe: float
    failed: list = field(default_factory=list)


def load_configs(raw: dict) -> list[ExperimentConfig]:
    """Expand a raw config mapping into one ExperimentConfig per method."""
    unknown = set(raw) - set(DEFAULTS)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    merged = {**copy.deepcopy(DEFAULTS), **raw}
    methods = merged.pop("method")
    methods = [methods] if isinstance(methods, str) else list(methods)
    name = merged.pop("experiment")
    out = []
    for m in methods:
        exp = name if name and len(methods) == 1 else (f"{name}-{m}" if name else None)
        out.append(ExperimentConfig(method=m, experiment=exp, **merged))
    return out


def _trace_csv(report, n_dims: int) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["iter", "nfe_cum"] + [f"d{i + 1}" for i in range(n_dims)]
               + ["n_r", "lambda", "mean", "err_var", "aei"])
    for r in report.trace:
        w.writerow([r.iteration, r.nfe_cum] + [repr(float(v)) for v in r.point]
                   + [r.n_r, repr(float(r.lam)), repr(float(r.mean)),
                      repr(float(r.err_var)), repr(float(r.aei))])
    return buf.getvalue()


def run_single(cfg: ExperimentConfig, index: int) -> dict:
    """Execute run ``index`` of ``cfg``; returns a plain dict (picklable)."""
    seed = cfg.seed + index
    problem = cfg.build_problem()
    try:
        if cfg.method == "gbnm":
            target, gcfg = cfg.gbnm_config(seed)
            report = run_gbnm(problem, target, gcfg)
        else:
            report = run(problem, cfg.sego_config(seed))
    except Exception as exc:  # recorded, summarized over the survivors
        return {"index": index, "seed": seed, "error": f"{type(exc).__name__}: {exc}"}
    exact = None
    if problem.exact_mean is not None:
        exact = float(np.asarray(problem.exact_mean(report.best_design)).reshape(-1)[0])
    return {
        "index": index, "seed": seed, "best_design": [float(v) for v in report.best_design],
        "best_estimate": float(report.best_estimate), "best_exact": exact,
        "nfe_used": int(report.nfe_used), "flags": list(report.flags),
        "csv": _trace_csv(report, problem.n),
    }


def _summarize(results) -> Summary:
    ok = [r for r in results if "error" not in r]
    failed = [{"index": r["index"], "error": r["error"]} for r in results if "error" in r]
    if failed:
        warnings.warn(f"{len(failed)} run(s) failed; summary covers {len(ok)}")
    if not ok:
        raise RuntimeError("every run failed")
    best = [r["best_estimate"] for r in ok]
    exact = [r["best_exact"] for r in ok] if ok[0]["best_exact"] is not None else None
    scored = exact if exact is not None else best
    return Summary(best, exact, float(np.mean(scored)), percentiles(scored, 5),
                   percentiles(scored, 95), float(np.mean([r["nfe_used"] for r in ok])), failed)


def _star_run(args):
    return run_single(*args)


def run_experiment(cfg: ExperimentConfig, write: bool = True):
    """Run every seeded repetition of ``cfg``; returns ``(summary, per-run results)``.

    Statistics are taken over the exact mean at each run's reported design
    when the problem has one, otherwise over the reported estimates.
    """
    jobs = [(cfg, i) for i in range(cfg.runs)]
    if cfg.workers > 1 and cfg.runs > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_star_run, jobs))
    else:
        results = [run_single(*j) for j in jobs]
    summary = _summarize(results)
    if write:
        write_outputs(cfg, summary, results)
    return summary, results


def write_outputs(cfg: ExperimentConfig, summary: Summary, results) -> Path:
    outdir = Path(cfg.out) / cfg.experiment
    outdir.mkdir(parents=True, exist_ok=True)
    for r in results:
        if "csv" in r:
            (outdir / f"run_{r['index']}.csv").write_text(r["csv"], encoding="utf-8")
    doc = {
        "config": cfg.to_dict(),
        "percentile_convention": PERCENTILE_CONVENTION,
        "statistic": "exact mean at best design" if summary.best_exact is not None else "estimate",
        "summary": {
            "mean": summary.mean, "percentile_5": summary.percentile_5,
            "percentile_95": summary.percentile_95, "mean_nfe": summary.mean_nfe,
        },
        "runs": [{k: v for k, v in r.items() if k != "csv"} for r in results],
        "failed": summary.failed,
    }
    (outdir / "summary.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                                         encoding="utf-8")
    return outdir


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stochego", description="Run sEGO / GBNM experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment")
    r.add_argument("--config", type=Path, help="JSON config file")
    r.add_argument("--problem", choices=PROBLEMS)
    r.add_argument("--method", action="append", choices=METHODS,
                   help="may be repeated for a paired comparison")
    r.add_argument("--nfe", type=int)
    r.add_argument("--runs", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--sigma-x", type=float, dest="sigma_x")
    r.add_argument("--sigma-target", type=float, dest="sigma_target")
    r.add_argument("--sigma-min", type=float, dest="sigma_min")
    r.add_argument("--rhc", type=float)
    r.add_argument("--constant-target", type=float, dest="constant_target")
    r.add_argument("--barrier", choices=("h300", "h400", "h500"))
    r.add_argument("--out")
    r.add_argument("--workers", type=int)
    r.add_argument("--experiment")
    return p


def resolve(args) -> dict:
    raw = json.loads(args.config.read_text(encoding="utf-8")) if args.config else {}
    for key in ("problem", "nfe", "runs", "seed", "sigma_x", "barrier", "out", "workers",
                "experiment"):
        if getattr(args, key) is not None:
            raw[key] = getattr(args, key)
    if args.method:
        raw["method"] = args.method[0] if len(args.method) == 1 else args.method
    ad = dict(raw.get("adaptive", {}))
    for flag, key in (("sigma_target", "sigma2_target"), ("sigma_min", "sigma2_min"),
                      ("rhc", "r_hc")):
        if getattr(args, flag) is not None:
            ad[key] = getattr(args, flag)
    if ad:
        raw["adaptive"] = ad
    if args.constant_target is not None:
        raw["sego"] = {**raw.get("sego", {}), "constant_target": args.constant_target}
    return raw


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = _parser().parse_args(argv)
    try:
        configs = load_configs(resolve(args))
    except (ValueError, TypeError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for cfg in configs:
        summary, _ = run_experiment(cfg)
        print(f"{cfg.experiment}: mean {summary.mean:.6g}  p5 {summary.percentile_5:.6g}  "
              f"p95 {summary.percentile_95:.6g}  nfe {summary.mean_nfe:.1f}  "
              f"-> {Path(cfg.out) / cfg.experiment}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
