"""Run monitors, stability-bound calculators and convergence studies."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ParameterError
from .linalg import HypothesisH, estimate_hypothesis_h
from .models import LIPSCHITZ_F_PRIME, DoubleWell, ac_energy, ch_energy
from .operators import Kind, TensorOperator, build, build_second_order
from .schemes import SchemeConfig

__all__ = [
    "RunHistory",
    "StabilityReport",
    "record",
    "predict_bounds",
    "stability_bounds",
    "convergence_errors",
    "convergence_study",
    "fit_slope",
    "verify_monotone",
    "cos_test_function",
]

CSV_COLUMNS = ("t", "energy", "mass", "max_abs", "increment_norm")


@dataclass
class RunHistory:
    times: list = field(default_factory=list)
    energies: list = field(default_factory=list)
    masses: list = field(default_factory=list)
    max_abs: list = field(default_factory=list)
    increment_norms: list = field(default_factory=list)
    _last: np.ndarray | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.times)

    def rows(self):
        return zip(self.times, self.energies, self.masses, self.max_abs, self.increment_norms)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for row in self.rows():
                writer.writerow([repr(float(v)) for v in row])


def record(history: RunHistory, t: float, u, A: TensorOperator, well: DoubleWell | None,
           energy_kind: str = "ac") -> RunHistory:
    """Append energy, mass ``h^dim sum u``, ``max|u|`` and ``||u - u_prev||_2``.

    ``energy_kind`` is ``"ac"``, ``"ch"`` or ``"dirichlet"`` (``1/2 <Au,u>``,
    used for the heat equation).
    """
    u = np.asarray(u, dtype=float)
    if history.times and not t > history.times[-1]:
        raise ParameterError(f"record times must increase strictly ({t} after {history.times[-1]})")
    weight = A.h**A.dim
    if energy_kind == "ac":
        energy = ac_energy(u, A, well)
    elif energy_kind == "ch":
        energy = ch_energy(u, A, well)
    elif energy_kind == "dirichlet":
        energy = 0.5 * float(np.vdot(A(u), u)) * weight
    else:
        raise ParameterError(f"unknown energy kind {energy_kind!r}")
    inc = 0.0 if history._last is None else float(np.linalg.norm((u - history._last).ravel()))
    history.times.append(float(t))
    history.energies.append(float(energy))
    history.masses.append(float(u.sum() * weight))
    history.max_abs.append(float(np.max(np.abs(u))))
    history.increment_norms.append(inc)
    history._last = u.copy()
    return history


@dataclass(frozen=True)
class StabilityReport:
    """Time-step / stabilization bounds from the linear and phase-field
    stability results.  ``math.inf`` marks an unconditional branch.

    ``dt_bound_ac`` is the branch formula for RSS-IMEX Allen-Cahn;
    ``dt_bound_ac_kernel = 2 eps^2 / L`` is the extra restriction that applies
    when the operators share a nontrivial kernel (Neumann), and
    ``dt_bound_ac_effective`` is the minimum of the two.
    """

    hypothesis: HypothesisH
    tau: float
    epsilon: float
    lipschitz: float
    dt_bound_euler: float
    dt_bound_cn: float
    dt_bound_ac: float
    dt_bound_ac_kernel: float
    dt_bound_df: float
    dt_bound_convex: float
    tau_bound_ch: float
    unconditional_flags: dict

    @property
    def dt_bound_ac_effective(self) -> float:
        return min(self.dt_bound_ac, self.dt_bound_ac_kernel)


def _inv_or_inf(denominator: float) -> float:
    return math.inf if denominator <= 0 else 1.0 / denominator


def stability_bounds(hyp: HypothesisH, tau: float, epsilon: float,
                     lipschitz: float = LIPSCHITZ_F_PRIME) -> StabilityReport:
    """Evaluate every bound formula from precomputed spectral constants."""
    beta, rho, lam_a, lam_b = hyp.beta, hyp.rho_A, hyp.lambda_min_A, hyp.lambda_min_B
    L = lipschitz
    eps2 = epsilon**2

    euler = math.inf if tau >= beta / 2 else 2.0 / ((1.0 - 2.0 * tau / beta) * rho)
    cn = math.inf if tau >= beta else 2.0 / ((1.0 - tau / beta) * rho)

    if tau >= beta / 2:
        ac = _inv_or_inf(L / (2 * eps2) - (tau / beta - 0.5) * lam_a)
    else:
        ac = _inv_or_inf(L / (2 * eps2) - (tau / beta - 0.5) * rho)

    df = math.inf if tau >= beta / 2 else beta / (rho * (beta / 2 - tau))

    # convex split with F_e = u^2/(2 eps^2): lambda_hat = 1/eps^2, |lambda| = 0
    lam_hat = 1.0 / eps2
    margin = tau * beta - 0.5 * rho + lam_hat
    convex = math.inf if margin > 0 else _inv_or_inf((0.5 - tau * beta) * rho - lam_hat)

    tau_ch = max(beta, L / (2 * eps2 * lam_b) + beta / 2)
    flags = {
        "rss_euler": math.isinf(euler),
        "rss_cn": math.isinf(cn),
        "ac_rss_imex": math.isinf(ac),
        "ac_df": math.isinf(df),
        "ac_convex_split": math.isinf(convex),
        "ch_rss_imex": tau >= tau_ch,
        "ch_nlrss": tau > beta,
    }
    return StabilityReport(
        hypothesis=hyp,
        tau=tau,
        epsilon=epsilon,
        lipschitz=L,
        dt_bound_euler=euler,
        dt_bound_cn=cn,
        dt_bound_ac=ac,
        dt_bound_ac_kernel=2.0 * eps2 / L,
        dt_bound_df=df,
        dt_bound_convex=convex,
        tau_bound_ch=tau_ch,
        unconditional_flags=flags,
    )


def predict_bounds(A: TensorOperator, B: TensorOperator, cfg: SchemeConfig,
                   model: DoubleWell | None = None) -> StabilityReport:
    """Estimate Hypothesis-H constants densely and evaluate all bounds."""
    eps = model.epsilon if model is not None else cfg.epsilon
    return stability_bounds(estimate_hypothesis_h(A, B), cfg.tau, eps)


# -- convergence -------------------------------------------------------------


def cos_test_function():
    """``u(x) = cos(x(1-x))`` and its exact ``-u''``."""

    def u(x):
        return np.cos(x * (1.0 - x))

    def minus_upp(x):
        g = x - x * x
        return np.cos(g) * (1.0 - 2.0 * x) ** 2 - 2.0 * np.sin(g)

    return u, minus_upp


def _op_for_spacing(kind: Kind, h: float):
    m = int(round(1.0 / h))
    if kind is Kind.SECOND_ORDER:
        return build_second_order(m, 1.0 / m, "cell")
    return build(kind, m + 1, 1.0 / m)


def convergence_errors(kind, h_list: Sequence[float], test_function=None) -> np.ndarray:
    """Max-norm error of ``P^{-1} Q u`` against the exact ``-u''`` for each h.

    ``test_function`` is a pair ``(u, minus_upp)``; by default
    ``u(x) = cos(x(1-x))`` on [0, 1].
    """
    kind = Kind(kind)
    u, exact = test_function or cos_test_function()
    errors = []
    for h in h_list:
        op = _op_for_spacing(kind, h)
        x = op.nodes()
        errors.append(float(np.max(np.abs(op.apply(u(x)) - exact(x)))))
    return np.array(errors)


def fit_slope(h_list: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of ``log(error)`` against ``log(h)``."""
    return float(np.polyfit(np.log(h_list), np.log(errors), 1)[0])


def convergence_study(kind, h_list: Sequence[float], test_function=None) -> float:
    """Fitted convergence order over ``h_list`` (at least four grids).

    The coarsest grid is dropped when its error ratio to the next grid exceeds
    the ratio the design order predicts by more than 1.5x (pre-asymptotic).
    """
    kind = Kind(kind)
    h_list = sorted(h_list, reverse=True)
    if len(h_list) < 4:
        raise ParameterError("a convergence study needs at least four grid sizes")
    errors = convergence_errors(kind, h_list, test_function)
    predicted = (h_list[0] / h_list[1]) ** kind.design_order
    if errors[0] / errors[1] > 1.5 * predicted:
        h_list, errors = h_list[1:], errors[1:]
    return fit_slope(h_list, errors)


def verify_monotone(values: Iterable[float], direction: str = "decreasing",
                    strict: bool = False, rtol: float = 1e-12):
    """Check a sequence is monotone; returns ``(ok, first_violation_index)``.

    A step violates non-strict monotonicity when it moves the wrong way by
    more than ``rtol * (1 + |value|)``; strict mode also rejects plateaus.
    """
    vals = [float(v) for v in values]
    sign = -1.0 if direction == "decreasing" else 1.0
    if direction not in ("decreasing", "increasing"):
        raise ParameterError(f"direction must be 'decreasing' or 'increasing', got {direction!r}")
    for i in range(1, len(vals)):
        change = sign * (vals[i] - vals[i - 1])
        slack = rtol * (1.0 + abs(vals[i - 1]))
        if change < -slack or (strict and change <= 0):
            return False, i
    return True, None
