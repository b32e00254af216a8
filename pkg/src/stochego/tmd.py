"""Tuned-mass-damper design under Kanai-Tajimi ground motion.

The integrand is ``-beta(d, x)``: the reliability index of the top-floor
displacement barrier for one realization ``x`` of the story properties,
with stationary response statistics from the Lyapunov equation and
failure probability from the out-crossing rate over Poisson-arriving events.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_continuous_lyapunov
from scipy.stats import norm

from .sampling import DesignSpace, RandomSpec, Variate

N_STORIES = 10
STORY_HEIGHT = 3.0
STORY_K, STORY_K_COV = 650.0e6, 0.15
STORY_M, STORY_M_COV = 360.0e3, 0.05
STORY_C, STORY_C_COV = 6.20e6, 0.25
TMD_M, TMD_M_COV = 108.0e3, 0.05
K_D_RANGE = (0.0, 4000e3)  # N/m
C_D_RANGE = (0.0, 1000e3)  # N s/m
BARRIERS = {"h300": 300.0, "h400": 400.0, "h500": 500.0}
UNSTABLE_BETA = -10.0


class NonphysicalRealization(ValueError):
    """The state matrix is not asymptotically stable."""


@dataclass(frozen=True, eq=False)
class StructureRealization:
    k: np.ndarray
    m: np.ndarray
    c: np.ndarray
    k_d: float
    c_d: float
    m_d: float

    def __post_init__(self):
        for name in ("k", "m", "c"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        values = np.concatenate([self.k, self.m, self.c, [self.k_d, self.c_d, self.m_d]])
        if np.any(values <= 0):
            raise ValueError("structural properties must be strictly positive")

    @property
    def n_stories(self) -> int:
        return self.k.size


@dataclass(frozen=True)
class ExcitationSpec:
    S0: float = 1e-3  # m^2/s^3
    xi_f: float = 0.6
    omega_f: float = 37.3  # rad/s


@dataclass(frozen=True)
class ReliabilitySpec:
    b: float  # m
    t_E: float = 50.0  # s
    t_D: float = 50.0  # years
    nu: float = 0.1  # events per year

    @classmethod
    def for_barrier(cls, name: str, height: float = N_STORIES * STORY_HEIGHT, **kw):
        return cls(b=height / BARRIERS[name], **kw)


def _chain(values, coupling):
    """Tridiagonal shear-building matrix for springs (or dashpots) in series."""
    v = np.append(values, coupling)
    n = v.size
    mat = np.zeros((n, n))
    for i in range(n):
        mat[i, i] = v[i] + (v[i + 1] if i + 1 < n else 0.0)
        if i + 1 < n:
            mat[i, i + 1] = mat[i + 1, i] = -v[i + 1]
    return mat


def assemble(real: StructureRealization):
    """Mass, damping and stiffness matrices with the TMD as the last degree of freedom."""
    M = np.diag(np.append(real.m, real.m_d))
    C = _chain(real.c, real.c_d)
    K = _chain(real.k, real.k_d)
    return M, C, K


def kanai_tajimi_psd(omega, spec: ExcitationSpec = ExcitationSpec()):
    w2 = np.asarray(omega, dtype=float) ** 2
    wf2 = spec.omega_f**2
    damp = 4.0 * wf2 * spec.xi_f**2 * w2
    return spec.S0 * (wf2**2 + damp) / ((w2 - wf2) ** 2 + damp)


def stationary_covariance(A, B, W: float) -> np.ndarray:
    """Solve ``A Q + Q A' + B W B' = 0`` for a stable ``A``."""
    A = np.asarray(A, dtype=float)
    if np.max(np.linalg.eigvals(A).real) >= 0:
        raise NonphysicalRealization("state matrix has eigenvalues with non-negative real part")
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    Q = solve_continuous_lyapunov(A, -W * (B @ B.T))
    if not np.all(np.isfinite(Q)):
        raise NonphysicalRealization("Lyapunov solve failed")
    return 0.5 * (Q + Q.T)


def state_space(M, C, K, spec: ExcitationSpec = ExcitationSpec()):
    """Structure plus Kanai-Tajimi filter, driven by bedrock white noise.

    States are ``(z, z_dot, x_f, x_f_dot)`` with ``z`` relative to the
    ground. The filter obeys ``x_f'' + 2 xi w x_f' + w^2 x_f = -w_b`` and the
    ground acceleration is ``-(2 xi w x_f' + w^2 x_f)``. Returns ``(A, B)``.
    """
    n = M.shape[0]
    Minv = np.linalg.inv(M)
    wf, xf = spec.omega_f, spec.xi_f
    A = np.zeros((2 * n + 2, 2 * n + 2))
    A[:n, n:2 * n] = np.eye(n)
    A[n:2 * n, :n] = -Minv @ K
    A[n:2 * n, n:2 * n] = -Minv @ C
    # -M^-1 m a_g with m the mass vector is -a_g on every floor
    A[n:2 * n, 2 * n] = wf**2
    A[n:2 * n, 2 * n + 1] = 2 * xf * wf
    A[2 * n, 2 * n + 1] = 1.0
    A[2 * n + 1, 2 * n] = -(wf**2)
    A[2 * n + 1, 2 * n + 1] = -2 * xf * wf
    B = np.zeros(2 * n + 2)
    B[2 * n + 1] = -1.0
    return A, B


def response_stats(real: StructureRealization, spec: ExcitationSpec = ExcitationSpec(),
                   floor: int | None = None):
    """Standard deviations of the top-floor relative displacement and velocity."""
    M, C, K = assemble(real)
    n = M.shape[0]
    A, B = state_space(M, C, K, spec)
    Q = stationary_covariance(A, B, 2 * np.pi * spec.S0)
    i = real.n_stories - 1 if floor is None else floor
    return float(np.sqrt(Q[i, i])), float(np.sqrt(Q[n + i, n + i]))


def upcrossing_rate(sigma_z: float, sigma_zdot: float, b: float) -> float:
    if sigma_z <= 0:
        raise ValueError("sigma_z must be positive")
    return float(sigma_zdot / sigma_z / (2 * np.pi) * np.exp(-(b**2) / (2 * sigma_z**2)))


def failure_probability(v_plus: float, rel: ReliabilitySpec) -> float:
    """Lifetime failure probability from the per-event out-crossing probability.

    With ``n_e ~ Poisson(nu t_D)`` events and per-event failure probability
    ``P_E``, the series over ``n_e`` sums to ``1 - exp(-nu t_D P_E)``.
    """
    if v_plus < 0:
        raise ValueError("crossing rate must be non-negative")
    p_event = -np.expm1(-2.0 * rel.t_E * v_plus)
    return float(-np.expm1(-rel.nu * rel.t_D * p_event))


def reliability_index(p_f: float) -> float:
    p = min(max(p_f, 1e-15), 1 - 1e-15)
    return float(-norm.ppf(p))


def realization_from(d, x) -> StructureRealization:
    """Build a structure from the design ``(k_d, c_d)`` and an input vector.

    ``x`` holds 10 story stiffnesses, 10 masses and 10 dampings, optionally
    followed by a random TMD mass (otherwise its mean is used).
    """
    x = np.asarray(x, dtype=float)
    n = N_STORIES
    k_d = max(float(d[0]), 1e-6 * K_D_RANGE[1])
    c_d = max(float(d[1]), 1e-6 * C_D_RANGE[1])
    m_d = TMD_M
    if x.size == 3 * n + 1:
        m_d = x[3 * n]
    elif x.size != 3 * n:
        raise ValueError(f"expected {3 * n} or {3 * n + 1} inputs, got {x.size}")
    return StructureRealization(k=x[:n], m=x[n:2 * n], c=x[2 * n:3 * n], k_d=k_d, c_d=c_d, m_d=m_d)


def beta_of(d, x, rel: ReliabilitySpec, spec: ExcitationSpec = ExcitationSpec()) -> float:
    try:
        real = realization_from(d, x)
        sz, szd = response_stats(real, spec)
    except NonphysicalRealization:
        return UNSTABLE_BETA
    return reliability_index(failure_probability(upcrossing_rate(sz, szd, rel.b), rel))


def tmd_phi(d, x, rel: ReliabilitySpec, spec: ExcitationSpec = ExcitationSpec()):
    """``-beta`` for one input vector, or for each row of a stack."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return -beta_of(d, x, rel, spec)
    return np.array([-beta_of(d, row, rel, spec) for row in x])


def random_spec(tmd_random: bool = True) -> RandomSpec:
    """Story variates, plus the TMD mass as a trailing variate when ``tmd_random``."""
    variates = ([Variate("gamma", STORY_K, STORY_K_COV)] * N_STORIES
                + [Variate("gamma", STORY_M, STORY_M_COV)] * N_STORIES
                + [Variate("gamma", STORY_C, STORY_C_COV)] * N_STORIES)
    if tmd_random:
        variates.append(Variate("gamma", TMD_M, TMD_M_COV))
    return RandomSpec(variates)


def tmd_problem(barrier: str = "h400", tmd_random: bool = True,
                excitation: ExcitationSpec = ExcitationSpec()):
    from functools import partial

    from .problems import StochasticProblem

    rel = ReliabilitySpec.for_barrier(barrier)
    return StochasticProblem(
        f"tmd-{barrier}", DesignSpace([K_D_RANGE[0], C_D_RANGE[0]], [K_D_RANGE[1], C_D_RANGE[1]]),
        random_spec(tmd_random), partial(tmd_phi, rel=rel, spec=excitation))
