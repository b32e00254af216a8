"""Augmented expected improvement and its maximization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.stats import norm

from .kriging import SurrogateModel


@dataclass(frozen=True, eq=False)
class InfillProposal:
    point: np.ndarray
    aei_value: float
    n_close: int = 0
    assigned_target: float = float("nan")
    flat: bool = False


def effective_best(model: SurrogateModel, alpha: float = 1.0) -> int:
    """Index of the sampled point minimizing ``y_hat + alpha * s_n``.

    ``s_n`` is the prediction error at each sampled point with its own
    intrinsic noise.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    y_hat = model.predict(model.X)
    s_n = np.sqrt(model.mse(model.X, model.intrinsic))
    return int(np.argmin(y_hat + alpha * s_n))


def expected_improvement(y_hat, s, y_star):
    """``E[max(0, y_star - Y)]`` for ``Y ~ N(y_hat, s**2)``."""
    y_hat, s, y_star = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (y_hat, s, y_star)))
    shape = y_hat.shape
    y_hat, s, y_star = (a.reshape(-1) for a in (y_hat, s, y_star))
    gain = y_star - y_hat
    out = np.maximum(gain, 0.0)
    pos = s > 0
    u = gain[pos] / s[pos]
    out[pos] = gain[pos] * norm.cdf(u) + s[pos] * norm.pdf(u)
    out = np.maximum(out, 0.0).reshape(shape)
    return float(out) if out.ndim == 0 else out


def aei_from_moments(y_hat, s2, lam, y_star):
    """EI against ``y_star`` times the noise penalty ``1 - sqrt(lam) / sqrt(s2 + lam)``."""
    s2 = np.asarray(s2, dtype=float)
    lam = np.asarray(lam, dtype=float)
    total = s2 + lam
    with np.errstate(invalid="ignore", divide="ignore"):
        penalty = np.where(total > 0, 1.0 - np.sqrt(lam) / np.sqrt(np.where(total > 0, total, 1.0)), 1.0)
    return expected_improvement(y_hat, np.sqrt(s2), y_star) * penalty


class AeiCriterion:
    """AEI of one fitted model, with the incumbent computed once."""

    def __init__(self, model: SurrogateModel, alpha: float = 1.0):
        self.model = model
        self.best_index = effective_best(model, alpha)
        self.y_star = float(model.predict(model.X[self.best_index]))

    def __call__(self, D, lam):
        D = np.atleast_2d(D)
        y_hat = self.model.predict(D)
        # surrogate error of the mean; the candidate's own noise enters via the penalty
        s2 = self.model.mse(D, 0.0)
        return aei_from_moments(y_hat, s2, lam, self.y_star)


def aei(model: SurrogateModel, d, lambda_at_d: float, alpha: float = 1.0) -> float:
    return float(AeiCriterion(model, alpha)(d, lambda_at_d)[0])


def maximize_aei(model: SurrogateModel, lambda_fn, rng: np.random.Generator,
                 alpha: float = 1.0, probes_per_dim: int = 200, starts: int = 5) -> InfillProposal:
    """Maximize AEI over the unit hypercube.

    ``lambda_fn`` maps an array of candidate points to the noise level each
    would be simulated to. Probing picks ``starts`` seeds for bounded
    L-BFGS-B; the best of probes and polished points is returned.
    """
    crit = AeiCriterion(model, alpha)
    n = model.X.shape[1]
    probes = rng.uniform(size=(probes_per_dim * n, n))
    values = crit(probes, lambda_fn(probes))
    if np.ptp(values) <= 1e-14:
        point = rng.uniform(size=n)
        return InfillProposal(point, float(crit(point, lambda_fn(point[None]))[0]), flat=True)

    order = np.argsort(values)[::-1][:starts]
    best_x, best_v = probes[order[0]].copy(), float(values[order[0]])
    scale = max(best_v, 1e-300)

    def neg(x):
        return -float(crit(x, lambda_fn(x[None]))[0]) / scale

    for k in order:
        res = minimize(neg, probes[k], method="L-BFGS-B", bounds=[(0.0, 1.0)] * n,
                       options={"maxiter": 100})
        x = np.clip(res.x, 0.0, 1.0)
        v = float(crit(x, lambda_fn(x[None]))[0])
        if v > best_v:
            best_x, best_v = x, v
    return InfillProposal(best_x, best_v)
