"""Single-step time integrators: stabilized (RSS) schemes for the heat,
Allen-Cahn and Cahn-Hilliard equations and their image-processing variants.

Every RSS step replaces an implicit ``A u^{k+1}`` by
``tau B (u^{k+1} - u^k) + A u^k`` with ``B`` the second-order Neumann
operator, so the only linear solves are cosine-diagonal shifts of ``B``.
Fields are plain arrays shaped like the operator grid; time loops live in
:mod:`rssphase.app`.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .errors import ConvergenceError, ParameterError
from .linalg import cosine_solver, project_mean_zero, solve_shifted, solve_shifted_squared
from .models import (
    InpaintingProblem,
    SegmentationProblem,
    df_secant,
    f_prime,
    potential,
    quadrature,
    segmentation_averages,
)
from .operators import TensorOperator

__all__ = [
    "Scheme",
    "SchemeConfig",
    "CHState",
    "SAVState",
    "double_well_flow",
    "heat_rss_euler_step",
    "heat_rss_cn_step",
    "heat_rss_gear_step",
    "heat_rss_adi_step",
    "ac_imex_step",
    "ac_rss_imex_step",
    "ac_df_step",
    "ac_convex_split_step",
    "ac_splitting_step",
    "ch_initial_state",
    "ch_rss_imex_step",
    "ch_nlrss_step",
    "ch_inpainting_step",
    "ac_segmentation_step",
    "sav_initial_state",
    "sav_energy",
    "ch_rss_sav_step",
]


class Scheme(str, enum.Enum):
    HEAT_RSS_EULER = "rss_euler"
    HEAT_RSS_CN = "rss_cn"
    HEAT_RSS_GEAR = "rss_gear"
    HEAT_RSS_ADI = "rss_adi"
    HEAT_RSS_STRANG = "rss_strang"
    AC_IMEX = "imex"
    AC_RSS_IMEX = "rss_imex"
    AC_DF = "df"
    AC_CONVEX_SPLIT = "convex_split"
    AC_SPLITTING = "splitting"
    CH_RSS_IMEX = "ch_rss_imex"
    CH_NLRSS = "ch_nlrss"
    CH_SAV = "ch_sav"
    CH_INPAINT = "ch_inpaint"
    AC_SEGMENT = "segment"


@dataclass(frozen=True)
class SchemeConfig:
    """Time step, stabilization weight and model parameters for a step."""

    dt: float
    tau: float = 2.0
    epsilon: float = 0.01
    scheme: Scheme | str = Scheme.AC_RSS_IMEX
    max_fixed_point_iters: int = 50
    fixed_point_tol: float = 1e-10
    C0: float = 1.0
    lambda0: float = 0.0
    lam: float = 0.0
    project_mean: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise ParameterError(f"dt must be positive, got {self.dt}")
        if not self.tau >= 0:
            raise ParameterError(f"tau must be nonnegative, got {self.tau}")
        if not self.epsilon > 0:
            raise ParameterError(f"epsilon must be positive, got {self.epsilon}")
        if not self.fixed_point_tol > 0:
            raise ParameterError("fixed_point_tol must be positive")
        if self.max_fixed_point_iters < 1:
            raise ParameterError("max_fixed_point_iters must be at least 1")
        object.__setattr__(self, "scheme", Scheme(self.scheme))

    def with_(self, **changes) -> "SchemeConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class CHState:
    u: np.ndarray
    mu: np.ndarray


@dataclass(frozen=True)
class SAVState:
    u: np.ndarray
    mu: np.ndarray
    s: float


def _maybe_project(delta: np.ndarray, cfg: SchemeConfig) -> np.ndarray:
    return project_mean_zero(delta) if cfg.project_mean else delta


def double_well_flow(x, dt: float, epsilon: float):
    """Exact flow of ``du/dt = (u - u^3)/eps^2`` over a time ``dt``."""
    gamma = np.exp(-2.0 * dt / epsilon**2)
    x = np.asarray(x, dtype=float)
    return x / np.sqrt(gamma + x * x * (1.0 - gamma))


# -- heat equation ---------------------------------------------------------


def _heat_rhs(u, A, source):
    rhs = -A(u)
    if source is not None:
        rhs += source
    return rhs


def heat_rss_euler_step(u, A: TensorOperator, B: TensorOperator, cfg: SchemeConfig, source=None):
    """``(I + tau dt B) d = dt (-A u + s)``, ``u + d`` (optionally mean-projected ``d``)."""
    delta = solve_shifted(B, cfg.tau * cfg.dt, cfg.dt * _heat_rhs(u, A, source))
    return u + _maybe_project(delta, cfg)


def heat_rss_cn_step(u, A, B, cfg: SchemeConfig, source=None):
    """Stabilized Crank-Nicolson: ``(I + tau dt/2 B) d = dt (-A u + s)``."""
    delta = solve_shifted(B, 0.5 * cfg.tau * cfg.dt, cfg.dt * _heat_rhs(u, A, source))
    return u + _maybe_project(delta, cfg)


def heat_rss_gear_step(u_prev, u, A, B, cfg: SchemeConfig, source=None):
    """Stabilized Gear (BDF2-type) step.

    ``(3u+ - 4u + u_prev)/(2dt) + tau B (u+ - u) + A u = s`` rearranged as
    ``(I + 2 tau dt/3 B) d = (u - u_prev)/3 + 2dt/3 (-A u + s)``.
    """
    rhs = (u - u_prev) / 3.0 + (2.0 * cfg.dt / 3.0) * _heat_rhs(u, A, source)
    delta = solve_shifted(B, 2.0 * cfg.tau * cfg.dt / 3.0, rhs)
    return u + _maybe_project(delta, cfg)


def _adi_substep(u, A, B, axis, tau, h, source=None):
    rhs = -h * A.apply_axis(u, axis)
    if source is not None:
        rhs = rhs + h * source
    return u + solve_shifted(B, tau * h, rhs, axes=(axis,))


def heat_rss_adi_step(u, A, B, cfg: SchemeConfig, strang: bool = False, source=None):
    """Directional RSS sweeps, one per axis.

    Plain ADI applies a full step on each axis in turn.  The Strang variant
    takes half steps on the leading axes, a full step on the last one and
    then the half steps again in reverse order.  A source term enters the
    sweep along the last axis, which always spans the whole step.
    """
    u0 = u
    dim = A.dim
    last = dim - 1
    if strang:
        order = [(ax, 0.5) for ax in range(last)]
        order += [(last, 1.0)]
        order += [(ax, 0.5) for ax in reversed(range(last))]
    else:
        order = [(ax, 1.0) for ax in range(dim)]
    for axis, frac in order:
        src = source if axis == last else None
        u = _adi_substep(u, A, B, axis, cfg.tau, frac * cfg.dt, src)
    if cfg.project_mean:
        u = u0 + project_mean_zero(u - u0)
    return u


# -- Allen-Cahn ------------------------------------------------------------


@functools.lru_cache(maxsize=8)
def _imex_factor(A: TensorOperator, dt: float):
    m = np.eye(A.size) + dt * A.dense()
    return scipy.linalg.lu_factor(m, check_finite=False)


def ac_imex_step(u, A: TensorOperator, B, cfg: SchemeConfig):
    """Classical semi-implicit step ``(I + dt A) u+ = u - dt/eps^2 f(u)``.

    Direct dense LU solve (factorization cached per operator and ``dt``);
    this is the reference the RSS schemes are measured against.
    """
    rhs = u - cfg.dt / cfg.epsilon**2 * f_prime(u)
    x = scipy.linalg.lu_solve(_imex_factor(A, cfg.dt), rhs.ravel(), check_finite=False)
    return x.reshape(u.shape)


def ac_rss_imex_step(u, A, B, cfg: SchemeConfig):
    """``(I + tau dt B) d = -dt (A u + f(u)/eps^2)``; ``u + d``."""
    rhs = -cfg.dt * (A(u) + f_prime(u) / cfg.epsilon**2)
    return u + solve_shifted(B, cfg.tau * cfg.dt, rhs)


def _fixed_point(update, u, cfg: SchemeConfig, wrap=lambda x: x):
    """Iterate ``x <- update(x)`` from ``u`` until the max-norm increment is
    below ``fixed_point_tol * (1 + ||u||_inf)``."""
    threshold = cfg.fixed_point_tol * (1.0 + float(np.max(np.abs(u))))
    current = u
    residual = np.inf
    for it in range(1, cfg.max_fixed_point_iters + 1):
        nxt = update(current)
        residual = float(np.max(np.abs(nxt - current)))
        current = nxt
        if residual <= threshold:
            return current, {"iterations": it, "residual": residual}
        if not np.isfinite(residual):
            break
    raise ConvergenceError(
        f"fixed point did not converge after {it} iterations "
        f"(last increment {residual:.3e}, tolerance {threshold:.3e})",
        residual=residual,
        iterate=wrap(current),
        iterations=it,
    )


def ac_df_step(u, A, B, cfg: SchemeConfig, full_output: bool = False):
    """Secant (DF) scheme ``d/dt + tau B d + DF(u+, u)/eps^2 = -A u``.

    Solved by fixed-point iteration on ``u+`` with the secant term frozen at
    the previous iterate; each iteration is one cosine solve.
    """
    au = A(u)
    gamma = cfg.tau * cfg.dt
    scale = 1.0 / cfg.epsilon**2

    def update(v):
        rhs = -cfg.dt * (au + scale * df_secant(v, u))
        return u + solve_shifted(B, gamma, rhs)

    out, info = _fixed_point(update, u, cfg)
    return (out, info) if full_output else out


def ac_convex_split_step(u, A, B, cfg: SchemeConfig, full_output: bool = False):
    """Stabilized convex splitting
    ``d/dt + tau B d + grad F_c(u+)/eps^2 = -A u + grad F_e(u)/eps^2``.

    The cubic contractive term is lagged inside a fixed-point loop.
    """
    au = A(u)
    gamma = cfg.tau * cfg.dt
    scale = 1.0 / cfg.epsilon**2

    def update(v):
        rhs = -cfg.dt * (au + scale * (v * v * v - u))
        return u + solve_shifted(B, gamma, rhs)

    out, info = _fixed_point(update, u, cfg)
    return (out, info) if full_output else out


def ac_splitting_step(u, A, B, cfg: SchemeConfig):
    """RSS linear step followed by the exact double-well flow.

    With ``cfg.project_mean`` the linear increment is centered first.
    """
    delta = solve_shifted(B, cfg.tau * cfg.dt, -cfg.dt * A(u))
    u_star = u + _maybe_project(delta, cfg)
    return double_well_flow(u_star, cfg.dt, cfg.epsilon)


def ac_segmentation_step(phi, A, B, prob: SegmentationProblem, cfg: SchemeConfig):
    """One step of the fidelity / RSS / double-well splitting for segmentation.

    Uses ``prob.lam`` and ``prob.epsilon``; the fidelity sub-step is the
    pointwise implicit update
    ``phi1 (1 + dt lam (a + b)) = phi - dt lam (a - b)`` with
    ``a = (f0 - c1)^2`` and ``b = (f0 - c2)^2``.
    """
    c1, c2 = segmentation_averages(phi, prob)
    a = (prob.f0 - c1) ** 2
    b = (prob.f0 - c2) ** 2
    k = cfg.dt * prob.lam
    phi1 = (phi - k * (a - b)) / (1.0 + k * (a + b))
    delta = solve_shifted(B, cfg.tau * cfg.dt, -cfg.dt * A(phi1))
    return double_well_flow(phi1 + delta, cfg.dt, prob.epsilon)


# -- Cahn-Hilliard ---------------------------------------------------------


def ch_initial_state(u, A, cfg: SchemeConfig) -> CHState:
    """State with the consistent chemical potential ``eps A u + f(u)/eps``."""
    u = np.asarray(u, dtype=float)
    eps = cfg.epsilon
    return CHState(u, eps * A(u) + f_prime(u) / eps)


def _ch_block_solve(state: CHState, A, B, cfg: SchemeConfig, nonlinear, project: bool) -> CHState:
    u, mu = state.u, state.mu
    eps, dt, tau = cfg.epsilon, cfg.dt, cfg.tau
    f1 = -dt * A(mu)
    f2 = -mu + eps * A(u) + nonlinear / eps
    dmu = solve_shifted_squared(B, tau * tau * dt * eps, f2 + tau * eps * B(f1))
    du = f1 - tau * dt * B(dmu)
    if project:
        du = project_mean_zero(du)
    return CHState(u + du, mu + dmu)


def ch_rss_imex_step(state: CHState, A, B, cfg: SchemeConfig, f=f_prime) -> CHState:
    """RSS-IMEX Cahn-Hilliard step via the Schur complement ``I + tau^2 dt eps B^2``.

    ``f`` may be replaced (e.g. by zero) to study the linear scheme.
    """
    return _ch_block_solve(state, A, B, cfg, f(state.u), cfg.project_mean)


def ch_nlrss_step(state: CHState, A, B, cfg: SchemeConfig, full_output: bool = False):
    """Nonlinear RSS step: the RSS-IMEX block solve with ``f(u)`` replaced by
    the secant ``DF(u^{k,m}, u^k)``, iterated to a fixed point in ``u``."""
    u0 = state.u

    def update(current: CHState) -> CHState:
        return _ch_block_solve(state, A, B, cfg, df_secant(current.u, u0), cfg.project_mean)

    threshold = cfg.fixed_point_tol * (1.0 + float(np.max(np.abs(u0))))
    current = state
    residual = np.inf
    for it in range(1, cfg.max_fixed_point_iters + 1):
        nxt = update(current)
        residual = float(np.max(np.abs(nxt.u - current.u)))
        current = nxt
        if residual <= threshold:
            info = {"iterations": it, "residual": residual}
            return (current, info) if full_output else current
        if not np.isfinite(residual):
            break
    raise ConvergenceError(
        f"NLRSS inner loop did not converge after {it} iterations "
        f"(last increment {residual:.3e})",
        residual=residual,
        iterate=current,
        iterations=it,
    )


INPAINT_RTOL = 1e-12
DIRECT_FALLBACK_MAX_UNKNOWNS = 1 << 16


def _inpaint_solve(B: TensorOperator, gamma: float, diag: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``(I + diag + gamma B^2) x = rhs``.

    ``B`` is symmetric in the quadrature inner product with weights ``w``, so
    CG runs on the weighted system ``w (I + diag + gamma B^2) x = w rhs``,
    preconditioned by ``(I + gamma B^2)^{-1} w^{-1}``; falls back to a sparse
    direct solve if CG stalls.
    """
    shape = rhs.shape
    solver = cosine_solver(B)
    w = solver.weights()
    d = diag.ravel()

    def matvec(x):
        x = x.reshape(shape)
        return (w * (x + diag * x + gamma * B(B(x)))).ravel()

    def precond(r):
        return solver.solve(gamma, r.reshape(shape) / w, power=2).ravel()

    size = rhs.size
    op = spla.LinearOperator((size, size), matvec=matvec, dtype=float)
    pre = spla.LinearOperator((size, size), matvec=precond, dtype=float)
    wr = (w * rhs).ravel()
    x, info = spla.cg(op, wr, x0=precond(wr), rtol=INPAINT_RTOL, atol=0.0, M=pre, maxiter=500)
    if info == 0:
        return x.reshape(shape)
    if size > DIRECT_FALLBACK_MAX_UNKNOWNS:
        raise ConvergenceError("inpainting CG solve failed and the grid is too large for a direct solve")
    bq = B.sparse_q()
    m = sps.identity(size, format="csc") + sps.diags(d, format="csc") + gamma * (bq @ bq).tocsc()
    return spla.spsolve(m, rhs.ravel()).reshape(shape)


def ch_inpainting_step(state: CHState, A, B, prob: InpaintingProblem, cfg: SchemeConfig) -> CHState:
    """RSS-IMEX Cahn-Hilliard step with the fidelity term ``lambda0 D (u - g)``.

    ``d_u`` is eliminated first:
    ``(I + dt lambda0 D + tau^2 dt eps B^2) d_u = F1 - tau dt B F2`` and
    ``d_mu = F2 + eps tau B d_u``.  No mean projection (the fidelity forcing
    does not conserve mass).
    """
    u, mu = state.u, state.mu
    eps, dt, tau = cfg.epsilon, cfg.dt, cfg.tau
    fid = dt * prob.lambda0 * prob.mask
    f1 = fid * (prob.g - u) - dt * A(mu)
    f2 = -mu + eps * A(u) + f_prime(u) / eps
    du = _inpaint_solve(B, tau * tau * dt * eps, fid, f1 - tau * dt * B(f2))
    dmu = f2 + eps * tau * B(du)
    return CHState(u + du, mu + dmu)


# -- scalar auxiliary variable ---------------------------------------------


def sav_initial_state(u, A, cfg: SchemeConfig, f=f_prime, F=potential) -> SAVState:
    """State with ``mu = A u + f(u)`` and ``s = sqrt(Q_h(F(u)) + C0)``."""
    u = np.asarray(u, dtype=float)
    radicand = quadrature(F(u), A.h) + cfg.C0
    if not radicand > 0:
        raise ParameterError(f"SAV radicand {radicand} is not positive; increase C0")
    return SAVState(u, A(u) + f(u), float(np.sqrt(radicand)))


def sav_energy(state: SAVState, A: TensorOperator) -> float:
    """Modified energy ``1/2 Q_h(<A u, u>) + s^2``."""
    return 0.5 * float(np.vdot(A(state.u), state.u)) * A.h**A.dim + state.s**2


def ch_rss_sav_step(state: SAVState, A, B, cfg: SchemeConfig, f=f_prime, F=potential,
                    full_output: bool = False):
    """Stabilized IMEX-SAV Cahn-Hilliard step.

    Solves
    ``d_u/dt + tau B d_mu = -A mu``,
    ``d_mu = tau B d_u + A u - mu + s+ b`` and
    ``s+ - s = Q_h(b d_u)/2`` with ``b = f(u)/sqrt(Q_h(F(u)) + C0)``.
    Substituting ``s+`` leaves ``(I + tau^2 dt B^2) d_u`` plus a rank-one
    term in ``b``, handled with two cosine solves and a scalar correction.
    With ``cfg.project_mean`` both solves are centered before the scalar
    elimination, so ``d_u`` has zero mean and the ``s+`` equation still holds.
    """
    u, mu, s = state.u, state.mu, state.s
    dt, tau = cfg.dt, cfg.tau
    weight = A.h**A.dim
    radicand = quadrature(F(u), A.h) + cfg.C0
    if not radicand > 0:
        raise ParameterError(f"SAV radicand {radicand} is not positive; increase C0")
    b = f(u) / np.sqrt(radicand)
    c = 0.5 * weight
    au = A(u)
    f1 = -dt * A(mu)
    f2 = au - mu + s * b
    gamma = tau * tau * dt
    x0 = solve_shifted_squared(B, gamma, f1 - tau * dt * B(f2))
    y = solve_shifted_squared(B, gamma, tau * dt * B(b))
    if cfg.project_mean:
        # d_u is a combination of x0 and y, so centering both keeps s+ exact
        x0, y = project_mean_zero(x0), project_mean_zero(y)
    b_du = np.vdot(b, x0) / (1.0 + c * np.vdot(b, y))
    du = x0 - c * b_du * y
    s_new = s + c * float(np.vdot(b, du))
    dmu = tau * B(du) + au - mu + s_new * b
    out = SAVState(u + du, mu + dmu, s_new)
    if full_output:
        return out, {"s_eliminated": s + c * float(b_du)}
    return out
