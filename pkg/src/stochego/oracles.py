"""Brute-force reference computations for the test-suite.

Nothing here imports the package's numerical modules: formulas are
written out again from scratch so the tests compare two independent
transcriptions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize


@dataclass(frozen=True)
class OracleResult:
    value: object
    method: str
    resolution: float
    seed: int | None = None


def grid_min(f, lower, upper, resolution: int = 10_000, starts: int = 20, seed: int = 0):
    """Minimize a vectorized ``f`` over a box.

    One or two dimensions use a full grid with ``resolution`` points per
    axis (capped at 2001 in 2D). Higher dimensions use multi-start
    Nelder-Mead from uniform points. Returns ``(d_star, OracleResult)``.
    """
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    n = lower.size
    if n == 1:
        g = np.linspace(lower[0], upper[0], resolution)
        vals = np.array([float(f(np.array([v]))) for v in g])
        k = int(np.argmin(vals))
        return np.array([g[k]]), OracleResult(float(vals[k]), "grid", (upper[0] - lower[0]) / (resolution - 1))
    if n == 2:
        m = min(resolution, 2001)
        a = np.linspace(lower[0], upper[0], m)
        b = np.linspace(lower[1], upper[1], m)
        A, B = np.meshgrid(a, b, indexing="ij")
        pts = np.stack([A.ravel(), B.ravel()], axis=1)
        vals = np.asarray(f(pts), dtype=float).reshape(-1)
        k = int(np.argmin(vals))
        return pts[k], OracleResult(float(vals[k]), "grid", float(np.max((upper - lower) / (m - 1))))
    rng = np.random.default_rng(seed)
    best_x, best_v = None, math.inf
    for _ in range(starts):
        x0 = rng.uniform(lower, upper)
        res = minimize(lambda z: float(f(np.clip(z, lower, upper))), x0, method="Nelder-Mead",
                       options={"xatol": 1e-8, "fatol": 1e-10, "maxiter": 20_000})
        if res.fun < best_v:
            best_x, best_v = np.clip(res.x, lower, upper), float(res.fun)
    return best_x, OracleResult(best_v, "multistart", 0.0, seed)


def mc_mean(integrand, d, draw_inputs, n: int, seed: int):
    """Plain average of ``n`` integrand values with a standard error.

    ``draw_inputs(rng, n)`` returns an ``(n, n_x)`` input array.
    """
    rng = np.random.default_rng(seed)
    vals = np.asarray(integrand(d, draw_inputs(rng, n)), dtype=float).ravel()
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    return OracleResult((float(vals.mean()), float(se)), "monte-carlo", n, seed)


def poisson_series_pf(p_event: float, rate_times_life: float, terms: int = 200) -> float:
    """``sum_i [1 - (1 - p)^i] Pois(i; mu)`` summed term by term."""
    total = 0.0
    log_w = -rate_times_life  # log Pois(0)
    for i in range(terms):
        if i > 0:
            log_w += math.log(rate_times_life) - math.log(i)
        total += (1.0 - (1.0 - p_event) ** i) * math.exp(log_w)
    return total


def sdof_white_noise_variances(m: float, c: float, k: float, S0: float):
    """Stationary ``(var x, var x_dot)`` of ``m x'' + c x' + k x = -m a``.

    ``a`` is white noise with two-sided spectral density ``S0``.
    """
    w0 = math.sqrt(k / m)
    zeta = c / (2.0 * math.sqrt(k * m))
    return math.pi * S0 / (2 * zeta * w0**3), math.pi * S0 / (2 * zeta * w0)


def crossing_count_simulation(m: float, c: float, k: float, S0: float, b: float,
                              duration: float, dt: float, seed: int, burn_in: float = 20.0):
    """Empirical up-crossing rate of level ``b`` for a white-noise-driven oscillator.

    Semi-implicit Euler; the discrete white noise has variance
    ``2 pi S0 / dt`` per step. Returns the rate plus sample standard
    deviations of displacement and velocity in ``value``.
    """
    period = 2 * math.pi / math.sqrt(k / m)
    if period / dt < 20:
        raise ValueError("time step does not resolve the natural period")
    rng = np.random.default_rng(seed)
    n_burn = int(burn_in / dt)
    n_steps = int(duration / dt)
    # start from the stationary distribution to shorten the transient
    vx, vv = sdof_white_noise_variances(m, c, k, S0)
    x, v = rng.normal(0, math.sqrt(vx)), rng.normal(0, math.sqrt(vv))
    noise_sd = math.sqrt(2 * math.pi * S0 / dt)
    chunk = 100_000
    crossings = 0
    s1 = s2 = t1 = t2 = 0.0
    count = 0
    prev = x
    done = -n_burn
    while done < n_steps:
        a_noise = rng.normal(0.0, noise_sd, size=chunk)
        xs = np.empty(chunk)
        vs = np.empty(chunk)
        for j in range(chunk):
            v += dt * (-(c * v + k * x) / m - a_noise[j])
            x += dt * v
            xs[j], vs[j] = x, v
        use = slice(max(0, -done), min(chunk, n_steps - done))
        if use.start < use.stop:
            seg = xs[use]
            before = np.concatenate([[prev if use.start == 0 else xs[use.start - 1]], seg[:-1]])
            crossings += int(np.count_nonzero((before < b) & (seg >= b)))
            s1 += seg.sum(); s2 += (seg**2).sum()
            t1 += vs[use].sum(); t2 += (vs[use] ** 2).sum()
            count += seg.size
        prev = xs[-1]
        done += chunk
    sx = math.sqrt(s2 / count - (s1 / count) ** 2)
    sv = math.sqrt(t2 / count - (t1 / count) ** 2)
    return OracleResult((crossings / (count * dt), sx, sv), "euler-sdof", dt, seed)


def dk_predict_mse(X, y, theta, p: float, D, digits: int = 50):
    """Deterministic ordinary Kriging evaluated in extended precision.

    Gaussian-family correlation ``exp(-sum theta |dx|^p)``; MLE mean and
    variance in closed form, with explicit inverses computed by mpmath at
    ``digits`` significant digits so the reference is free of the
    cancellation that limits double precision near sampled points.
    Returns ``(y_hat, mse)`` float arrays over rows of ``D``.
    """
    import mpmath

    X = np.asarray(X, dtype=float)
    D = np.atleast_2d(np.asarray(D, dtype=float))
    theta = [mpmath.mpf(float(t)) for t in np.atleast_1d(theta)]
    with mpmath.workdps(digits):
        pw = mpmath.mpf(p)

        def corr(a, b):
            return mpmath.exp(-mpmath.fsum(t * abs(mpmath.mpf(float(u)) - mpmath.mpf(float(v))) ** pw
                                           for t, u, v in zip(theta, a, b)))

        n = len(X)
        R = mpmath.matrix(n, n)
        for i in range(n):
            for j in range(n):
                R[i, j] = corr(X[i], X[j])
        Ri = R**-1
        one = mpmath.matrix([1] * n)
        yv = mpmath.matrix([mpmath.mpf(float(v)) for v in np.ravel(y)])
        Ri_one = Ri * one
        one_Ri_one = (one.T * Ri_one)[0]
        mu = (one.T * (Ri * yv))[0] / one_Ri_one
        resid = yv - one * mu
        Ri_resid = Ri * resid
        s2 = (resid.T * Ri_resid)[0] / n
        y_hat, mse = [], []
        for d in D:
            r = mpmath.matrix([corr(x, d) for x in X])
            y_hat.append(float(mu + (r.T * Ri_resid)[0]))
            Ri_r = Ri * r
            mse.append(float(s2 * (1 - (r.T * Ri_r)[0] + (1 - (one.T * Ri_r)[0]) ** 2 / one_Ri_one)))
    return np.array(y_hat), np.array(mse)
