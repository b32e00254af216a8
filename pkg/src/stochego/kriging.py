"""Ordinary and stochastic Kriging on the unit hypercube.

The intrinsic (simulation) variances enter the correlation matrix scaled by
the process variance, ``A = Psi + diag(intrinsic) / sigma2``, so that the
covariance of the observations is ``sigma2 * A``. The process variance and
``A`` depend on each other and are resolved by a short fixed-point
iteration inside the profile likelihood.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

log = logging.getLogger(__name__)

LOG10_THETA_BOUNDS = (-3.0, 3.0)
P_BOUNDS = (1.0, 2.0)
NUGGETS = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)
PROFILE_ITERATIONS = 5


@dataclass(frozen=True, eq=False)
class Hyperparameters:
    theta: np.ndarray
    p: np.ndarray

    def __init__(self, theta, p=None):
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        p = np.full_like(theta, 2.0) if p is None else np.atleast_1d(np.asarray(p, dtype=float))
        if theta.shape != p.shape:
            raise ValueError("theta and p must have the same length")
        if np.any(theta <= 0):
            raise ValueError("theta must be positive")
        if np.any((p < 1) | (p > 2)):
            raise ValueError("p must lie in [1, 2]")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "p", p)


def correlation(d_i, d_j, hyper: Hyperparameters) -> float:
    """``exp(-sum_k theta_k |d_i,k - d_j,k|**p_k)``."""
    d_i = np.asarray(d_i, dtype=float)
    d_j = np.asarray(d_j, dtype=float)
    if d_i.shape != d_j.shape:
        raise ValueError("points have different dimensions")
    return float(np.exp(-np.sum(hyper.theta * np.abs(d_i - d_j) ** hyper.p)))


def correlation_matrix(X1, X2, theta, p) -> np.ndarray:
    """Correlations between the rows of ``X1`` and ``X2``.

    ``theta`` and ``p`` may carry leading batch dimensions, giving a stack of
    matrices of shape ``batch + (len(X1), len(X2))``.
    """
    theta = np.asarray(theta, dtype=float)
    p = np.asarray(p, dtype=float)
    diff = np.abs(X1[:, None, :] - X2[None, :, :])  # (n1, n2, n)
    if np.all(p == 2.0):
        powered = diff**2
        dist = np.einsum("ijk,...k->...ij", powered, theta)
    else:
        dist = np.sum(theta[..., None, None, :] * diff ** p[..., None, None, :], axis=-1)
    return np.exp(-dist)


def _variance_floor(y, intrinsic) -> float:
    scale = max(float(np.var(y)), float(np.max(intrinsic, initial=0.0)))
    return 1e-14 * scale if scale > 0 else 1e-300


def _profile(psi, y, intrinsic):
    """Profile likelihood for a stack of correlation matrices.

    Returns ``(loglik, mu, sigma2)`` arrays over the stack. Matrices that
    cannot be factorized even with the largest nugget get ``-inf``.
    """
    batch = psi.shape[:-2]
    psi = psi.reshape((-1,) + psi.shape[-2:])
    ns = y.size
    floor = _variance_floor(y, intrinsic)
    noisy = bool(np.any(intrinsic > 0))
    sigma2 = np.full(psi.shape[0], max(float(np.var(y)), floor))
    rhs = np.stack([np.ones(ns), y], axis=-1)
    idx = np.arange(ns)
    for _ in range(PROFILE_ITERATIONS if noisy else 1):
        A = psi.copy()
        if noisy:
            A[:, idx, idx] += intrinsic[None, :] / sigma2[:, None]
        L, ok, A = _batched_cholesky(A)
        sol = _batched_solve(L[ok], A[ok], rhs)
        ainv_one, ainv_y = sol[..., 0], sol[..., 1]
        mu_ok = ainv_y.sum(-1) / ainv_one.sum(-1)
        resid = y[None, :] - mu_ok[:, None]
        ainv_r = ainv_y - mu_ok[:, None] * ainv_one
        s2_ok = np.maximum(np.einsum("bi,bi->b", resid, ainv_r) / ns, floor)
        sigma2 = sigma2.copy()
        sigma2[ok] = s2_ok
    logdet = 2.0 * np.sum(np.log(np.diagonal(L[ok], axis1=-2, axis2=-1)), axis=-1)
    loglik = np.full(psi.shape[0], -np.inf)
    mu = np.full(psi.shape[0], np.nan)
    loglik[ok] = -0.5 * ns * np.log(s2_ok) - 0.5 * logdet
    mu[ok] = mu_ok
    return loglik.reshape(batch), mu.reshape(batch), sigma2.reshape(batch)


def _batched_solve(L, A, rhs):
    """Solve ``A x = rhs`` for a stack, falling back to the Cholesky factors.

    The batched LU solve is faster but can report exact singularity on
    matrices whose Cholesky factorization succeeded.
    """
    try:
        return np.linalg.solve(A, np.broadcast_to(rhs, A.shape[:1] + rhs.shape))
    except np.linalg.LinAlgError:
        return np.stack([cho_solve((Lb, True), rhs) for Lb in L])


def _batched_cholesky(A):
    """Cholesky factors of a stack ``(b, n, n)`` with a per-matrix nugget ladder.

    Returns the factors, a mask of matrices that factorized and the
    matrices actually factorized (nugget included).
    """
    try:
        return np.linalg.cholesky(A), np.ones(A.shape[0], dtype=bool), A
    except np.linalg.LinAlgError:
        pass
    L = np.zeros_like(A)
    ok = np.zeros(A.shape[0], dtype=bool)
    A = A.copy()
    eye = np.eye(A.shape[-1])
    for b in range(A.shape[0]):
        for nug in NUGGETS:
            try:
                L[b] = np.linalg.cholesky(A[b] + nug * eye)
            except np.linalg.LinAlgError:
                continue
            A[b] += nug * eye
            ok[b] = True
            break
    return L, ok, A


def concentrated_log_likelihood(X, y, intrinsic, hyper: Hyperparameters) -> float:
    X = np.asarray(X, dtype=float)
    psi = correlation_matrix(X, X, hyper.theta, hyper.p)
    ll, _, _ = _profile(psi[None], np.asarray(y, float), np.asarray(intrinsic, float))
    return float(ll[0])


@dataclass(eq=False)
class SurrogateModel:
    """A fitted Kriging model; immutable once built."""

    X: np.ndarray
    y: np.ndarray
    intrinsic: np.ndarray
    hyper: Hyperparameters
    mu_hat: float
    sigma2_hat: float
    chol: np.ndarray
    nugget: float = 0.0
    log_likelihood: float = float("nan")
    flagged: bool = False
    _alpha: np.ndarray = field(init=False, repr=False)
    _ainv_one: np.ndarray = field(init=False, repr=False)
    _one_a_one: float = field(init=False, repr=False)

    def __post_init__(self):
        lower = (self.chol, True)
        self._ainv_one = cho_solve(lower, np.ones(self.y.size))
        self._alpha = cho_solve(lower, self.y - self.mu_hat)
        self._one_a_one = float(self._ainv_one.sum())

    @property
    def n_points(self) -> int:
        return self.y.size

    def correlations(self, D) -> np.ndarray:
        D = np.atleast_2d(np.asarray(D, dtype=float))
        return correlation_matrix(D, self.X, self.hyper.theta, self.hyper.p)

    def predict(self, D) -> np.ndarray | float:
        """``mu + r' A^-1 (y - mu)`` at one point or at each row of ``D``."""
        single = np.ndim(D) <= 1
        r = self.correlations(D)
        out = self.mu_hat + r @ self._alpha
        return float(out[0]) if single else out

    def mse(self, D, lam=0.0) -> np.ndarray | float:
        """Prediction error including the intrinsic noise ``lam`` at ``D``."""
        single = np.ndim(D) <= 1
        r = self.correlations(D)
        v = solve_triangular(self.chol, r.T, lower=True)
        r_a_r = np.sum(v**2, axis=0)
        one_a_r = r @ self._ainv_one
        bracket = 1.0 - r_a_r + (1.0 - one_a_r) ** 2 / self._one_a_one
        out = np.maximum(self.sigma2_hat * bracket + np.asarray(lam, dtype=float), 0.0)
        return float(out[0]) if single else out

    def to_json(self) -> str:
        return json.dumps({
            "X": self.X.tolist(), "y": self.y.tolist(), "intrinsic": self.intrinsic.tolist(),
            "theta": self.hyper.theta.tolist(), "p": self.hyper.p.tolist(),
            "mu_hat": self.mu_hat, "sigma2_hat": self.sigma2_hat, "nugget": self.nugget,
            "log_likelihood": self.log_likelihood,
        })


def predict(model: SurrogateModel, d):
    return model.predict(d)


def mse(model: SurrogateModel, d, lambda_at_d=0.0):
    return model.mse(d, lambda_at_d)


def build(X, y, intrinsic, hyper: Hyperparameters) -> SurrogateModel:
    """Assemble a model for fixed hyperparameters."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    intrinsic = np.asarray(intrinsic, dtype=float).ravel()
    if not (X.shape[0] == y.size == intrinsic.size):
        raise ValueError("plan, responses and intrinsic variances differ in length")
    if y.size < 2:
        raise ValueError("need at least two points")
    if np.any(intrinsic < 0):
        raise ValueError("intrinsic variances must be non-negative")
    psi = correlation_matrix(X, X, hyper.theta, hyper.p)
    floor = _variance_floor(y, intrinsic)
    noisy = np.any(intrinsic > 0)
    sigma2 = max(float(np.var(y)), floor)
    eye = np.eye(y.size)
    for nug in NUGGETS:
        ok = True
        s2 = sigma2
        for _ in range(PROFILE_ITERATIONS if noisy else 1):
            A = psi + np.diag(intrinsic / s2) + nug * eye
            try:
                L = np.linalg.cholesky(A)
            except np.linalg.LinAlgError:
                ok = False
                break
            lower = (L, True)
            ainv_one = cho_solve(lower, np.ones(y.size))
            mu = float(ainv_one @ y / ainv_one.sum())
            resid = y - mu
            s2_new = max(float(resid @ cho_solve(lower, resid)) / y.size, floor)
            if noisy:
                s2 = s2_new
        if ok:
            sigma2_hat = s2_new
            logdet = 2.0 * np.sum(np.log(np.diag(L)))
            ll = -0.5 * y.size * np.log(sigma2_hat) - 0.5 * logdet
            if nug > 0:
                log.debug("correlation matrix regularized with nugget %g", nug)
            return SurrogateModel(X, y, intrinsic, hyper, mu, sigma2_hat, L, nugget=nug,
                                  log_likelihood=float(ll), flagged=nug > 0)
    raise np.linalg.LinAlgError("augmented correlation matrix is singular even with a nugget")


@dataclass(frozen=True)
class SearchBudget:
    """Likelihood search effort: particle swarm then coordinate polish."""

    particles: int = 40
    iterations: int = 50
    polish_tol: float = 1e-3
    fit_p: bool = False


def _pso(objective, lower, upper, budget: SearchBudget, rng, warm=None):
    """Maximize ``objective`` (vectorized over rows) with a constricted particle swarm."""
    dim = lower.size
    n = budget.particles
    pos = rng.uniform(lower, upper, size=(n, dim))
    if warm is not None:
        pos[0] = np.clip(warm, lower, upper)
    span = upper - lower
    vel = rng.uniform(-span, span, size=(n, dim)) * 0.1
    val = objective(pos)
    best_pos, best_val = pos.copy(), val.copy()
    g = int(np.argmax(best_val))
    w, c1, c2 = 0.7298, 1.49618, 1.49618
    for _ in range(budget.iterations - 1):
        r1 = rng.uniform(size=(n, dim))
        r2 = rng.uniform(size=(n, dim))
        vel = w * vel + c1 * r1 * (best_pos - pos) + c2 * r2 * (best_pos[g] - pos)
        vel = np.clip(vel, -span, span)
        pos = np.clip(pos + vel, lower, upper)
        val = objective(pos)
        better = val > best_val
        best_pos[better] = pos[better]
        best_val[better] = val[better]
        g = int(np.argmax(best_val))
    return best_pos[g], best_val[g]


def _polish(objective, x, fx, lower, upper, tol):
    """Compass search: try +-step on every coordinate, halve the step on failure."""
    step = 0.25 * (upper - lower)
    while np.max(step) > tol:
        cand = np.repeat(x[None, :], 2 * x.size, axis=0)
        idx = np.arange(x.size)
        cand[2 * idx, idx] += step
        cand[2 * idx + 1, idx] -= step
        cand = np.clip(cand, lower, upper)
        vals = objective(cand)
        k = int(np.argmax(vals))
        if vals[k] > fx:
            x, fx = cand[k], vals[k]
        else:
            step = step / 2
    return x, fx


def fit(X, y, intrinsic, rng: np.random.Generator, budget: SearchBudget | None = None,
        warm: Hyperparameters | None = None) -> SurrogateModel:
    """Maximum-likelihood fit of the correlation parameters.

    ``theta`` is searched in log10 space over [-3, 3]; ``p`` is fixed at 2
    unless ``budget.fit_p`` is set.
    """
    budget = budget or SearchBudget()
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    intrinsic = np.asarray(intrinsic, dtype=float).ravel()
    if y.size < 2:
        raise ValueError("need at least two points")
    if np.unique(X, axis=0).shape[0] < 2:
        raise ValueError("need at least two distinct points")
    n = X.shape[1]
    diff = np.abs(X[:, None, :] - X[None, :, :])

    def objective(z):
        z = np.atleast_2d(z)
        theta = 10.0 ** z[:, :n]
        if budget.fit_p:
            p = z[:, n:]
            dist = np.sum(theta[:, None, None, :] * diff[None] ** p[:, None, None, :], axis=-1)
        else:
            dist = np.einsum("ijk,bk->bij", diff**2, theta)
        ll, _, _ = _profile(np.exp(-dist), y, intrinsic)
        return ll

    lo = np.full(n, LOG10_THETA_BOUNDS[0])
    hi = np.full(n, LOG10_THETA_BOUNDS[1])
    start = None if warm is None else np.log10(warm.theta)
    if budget.fit_p:
        lo = np.concatenate([lo, np.full(n, P_BOUNDS[0])])
        hi = np.concatenate([hi, np.full(n, P_BOUNDS[1])])
        if start is not None:
            start = np.concatenate([start, warm.p])
    z, fz = _pso(objective, lo, hi, budget, rng, warm=start)
    z, fz = _polish(objective, z, fz, lo, hi, budget.polish_tol)
    hyper = Hyperparameters(10.0 ** z[:n], z[n:] if budget.fit_p else None)
    return build(X, y, intrinsic, hyper)
