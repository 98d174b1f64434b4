"""Double-well potential, energies and the image-processing source terms.

Conventions: ``F(u) = (1 - u^2)^2 / 4`` and ``f(u) = F'(u) = u^3 - u``.
Quadratures are plain sums weighted by ``h**dim``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePhaseError, ParameterError
from .operators import GridField, TensorOperator

__all__ = [
    "LIPSCHITZ_F_PRIME",
    "DoubleWell",
    "InpaintingProblem",
    "SegmentationProblem",
    "potential",
    "f_prime",
    "df_secant",
    "convex_split_gradients",
    "quadrature",
    "ac_energy",
    "ch_energy",
    "segmentation_averages",
    "sav_auxiliary",
]

# sup |f'(u)| = sup |3u^2 - 1| over the invariant region [-1, 1]
LIPSCHITZ_F_PRIME = 2.0


@dataclass(frozen=True)
class DoubleWell:
    epsilon: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ParameterError(f"epsilon must be positive, got {self.epsilon}")


@dataclass(frozen=True)
class InpaintingProblem:
    """Damaged image ``g`` in [-1, 1]; ``mask`` is 1 where ``g`` is known."""

    g: np.ndarray
    mask: np.ndarray
    lambda0: float

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        mask = np.asarray(self.mask, dtype=float)
        if g.shape != mask.shape:
            raise ParameterError("g and mask must have the same shape")
        if not np.all(np.isfinite(g)):
            raise ParameterError("g contains NaN or Inf")
        if not np.all((mask == 0) | (mask == 1)):
            raise ParameterError("mask entries must be 0 or 1")
        if self.lambda0 < 0:
            raise ParameterError("lambda0 must be nonnegative")
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "mask", mask)


@dataclass(frozen=True)
class SegmentationProblem:
    """Normalized image ``f0`` in [0, 1] with fidelity weight ``lam``."""

    f0: np.ndarray
    lam: float
    epsilon: float

    def __post_init__(self):
        f0 = np.asarray(self.f0, dtype=float)
        if f0.size and (f0.min() < 0 or f0.max() > 1):
            raise ParameterError("f0 must lie in [0, 1]")
        if self.lam < 0:
            raise ParameterError("lam must be nonnegative")
        if not self.epsilon > 0:
            raise ParameterError("epsilon must be positive")
        object.__setattr__(self, "f0", f0)


def _values(u):
    return u.values if isinstance(u, GridField) else np.asarray(u, dtype=float)


def potential(u):
    u = _values(u)
    return 0.25 * (1.0 - u * u) ** 2


def f_prime(u, well: DoubleWell | None = None):
    """``f(u) = u^3 - u`` pointwise."""
    u = _values(u)
    return u * u * u - u


def df_secant(u, v, well: DoubleWell | None = None):
    """Secant slope ``(F(u) - F(v)) / (u - v)``, equal to ``f(u)`` when ``u == v``.

    Evaluated through the factored form ``(u + v)(u^2 + v^2 - 2) / 4``, which
    is the exact quotient for the quartic well and has no removable
    singularity, so it is symmetric in its arguments bit for bit.
    """
    u = _values(u)
    v = _values(v)
    return 0.25 * (u + v) * (u * u + v * v - 2.0)


def convex_split_gradients(u, well: DoubleWell | None = None):
    """Gradients of ``F_c = u^4/4 + 1/4`` and ``F_e = u^2/2`` (``F = F_c - F_e``)."""
    u = _values(u)
    return u * u * u, u.copy()


def quadrature(v, h: float) -> float:
    v = _values(v)
    return float(v.sum() * h**v.ndim)


def _dirichlet_form(u: np.ndarray, A: TensorOperator) -> float:
    return float(np.vdot(A(u), u) * A.h**A.dim)


def ac_energy(u, A: TensorOperator, well: DoubleWell) -> float:
    """``1/2 <Au, u> + 1/eps^2 <F(u), 1>`` with ``h**dim`` weights."""
    u = A._check_shape(_values(u))
    return 0.5 * _dirichlet_form(u, A) + quadrature(potential(u), A.h) / well.epsilon**2


def ch_energy(u, A: TensorOperator, well: DoubleWell) -> float:
    """``eps/2 <Au, u> + 1/eps <F(u), 1>`` with ``h**dim`` weights."""
    u = A._check_shape(_values(u))
    eps = well.epsilon
    return 0.5 * eps * _dirichlet_form(u, A) + quadrature(potential(u), A.h) / eps


def segmentation_averages(phi, prob: SegmentationProblem):
    """Weighted image averages ``c1`` (phase +1) and ``c2`` (phase -1)."""
    phi = _values(phi)
    f0 = prob.f0
    w1 = 1.0 + phi
    w2 = 1.0 - phi
    s1 = w1.sum()
    s2 = w2.sum()
    if s1 <= 0 or np.isclose(s1, 0.0, atol=1e-12 * phi.size):
        raise DegeneratePhaseError("phase +1 is empty: c1 is undefined")
    if s2 <= 0 or np.isclose(s2, 0.0, atol=1e-12 * phi.size):
        raise DegeneratePhaseError("phase -1 is empty: c2 is undefined")
    return float((f0 * w1).sum() / s1), float((f0 * w2).sum() / s2)


def sav_auxiliary(u, C0: float, h: float | None = None, well: DoubleWell | None = None) -> float:
    """``sqrt(Q_h(F(u)) + C0)``."""
    if h is None:
        if not isinstance(u, GridField):
            raise ParameterError("grid spacing h is required for a bare array")
        h = u.h
    radicand = quadrature(potential(u), h) + C0
    if not radicand > 0:
        raise ParameterError(f"SAV radicand {radicand} is not positive; increase C0")
    return float(np.sqrt(radicand))
