"""Fast shifted solves with the second-order Neumann operator, mean-zero
constraints, and dense estimation of the spectral-equivalence constants.

The second-order operator ``B`` is diagonalized by the orthonormal type-II
cosine transform, so ``(I + g B) x = f`` and ``(I + g B^2) x = f`` reduce to a
forward transform, a pointwise division and an inverse transform.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
import scipy.fft
import scipy.linalg

from .errors import DiagnosticSizeError, DimensionError, ParameterError
from .operators import GridField, Kind, TensorOperator

__all__ = [
    "CosineSolver",
    "HypothesisH",
    "cosine_solver",
    "solve_shifted",
    "solve_shifted_squared",
    "project_mean_zero",
    "solve_constrained_lagrangian",
    "estimate_hypothesis_h",
    "mean_zero_basis",
    "DIAGNOSTIC_MAX_UNKNOWNS",
]

DIAGNOSTIC_MAX_UNKNOWNS = 4096


@dataclass(frozen=True, eq=False)
class CosineSolver:
    """Spectral form of the mirror-closure second-order operator.

    Cell-centered grids use the orthonormal type-II transform with
    ``eigenvalues_per_axis[k] = 4 sin^2(pi k / 2n) / h^2``; vertex grids use
    the type-I transform with ``4 sin^2(pi k / 2(n-1)) / h^2``.  The
    ``dim``-D spectrum is the Kronecker sum of the per-axis values.
    """

    eigenvalues_per_axis: np.ndarray
    n: int
    dim: int
    h: float
    centering: str = "cell"

    @classmethod
    def create(cls, n: int, dim: int, h: float, centering: str = "cell") -> "CosineSolver":
        k = np.arange(n)
        m = n if centering == "cell" else n - 1
        lam = 4.0 * np.sin(np.pi * k / (2 * m)) ** 2 / h**2
        lam.setflags(write=False)
        return cls(lam, n, dim, h, centering)

    @property
    def dct_type(self) -> int:
        return 2 if self.centering == "cell" else 1

    def symbol(self, axes=None) -> np.ndarray:
        """Sum of the per-axis eigenvalues over ``axes``, broadcast to the grid."""
        axes = range(self.dim) if axes is None else axes
        total = np.zeros((self.n,) * self.dim)
        for axis in axes:
            shape = [1] * self.dim
            shape[axis] = self.n
            total = total + self.eigenvalues_per_axis.reshape(shape)
        return total

    def weights(self) -> np.ndarray:
        """Diagonal weights ``w`` making ``diag(w) B`` symmetric (trapezoidal
        on vertex grids, all ones on cell grids)."""
        w1 = np.ones(self.n)
        if self.centering == "vertex":
            w1[0] = w1[-1] = 0.5
        out = np.ones((self.n,) * self.dim)
        for axis in range(self.dim):
            shape = [1] * self.dim
            shape[axis] = self.n
            out = out * w1.reshape(shape)
        return out

    @property
    def _norm(self):
        # the unnormalized type-I pair diagonalizes the (nonsymmetric) vertex
        # matrix itself; the orthonormal one would diagonalize its weighted form
        return "ortho" if self.dct_type == 2 else "backward"

    def forward(self, f: np.ndarray, axes=None) -> np.ndarray:
        return scipy.fft.dctn(f, type=self.dct_type, norm=self._norm, axes=axes)

    def inverse(self, c: np.ndarray, axes=None) -> np.ndarray:
        return scipy.fft.idctn(c, type=self.dct_type, norm=self._norm, axes=axes)

    def solve(self, gamma: float, f: np.ndarray, power: int = 1, axes=None) -> np.ndarray:
        """Solve ``(I + gamma * B_axes**power) x = f``."""
        if gamma < 0:
            raise ParameterError(f"shift must be nonnegative, got gamma={gamma}")
        f = np.asarray(f, dtype=float)
        if f.shape != (self.n,) * self.dim:
            raise DimensionError(f"field shape {f.shape} does not match {(self.n,) * self.dim}")
        if gamma == 0:
            return f.copy()
        ax = tuple(range(self.dim)) if axes is None else tuple(axes)
        coeffs = self.forward(f, axes=ax)
        coeffs /= 1.0 + gamma * self.symbol(ax) ** power
        return self.inverse(coeffs, axes=ax)


@functools.lru_cache(maxsize=32)
def _cached_solver(n: int, dim: int, h: float, centering: str) -> CosineSolver:
    return CosineSolver.create(n, dim, h, centering)


def cosine_solver(B: TensorOperator) -> CosineSolver:
    if B.kind is not Kind.SECOND_ORDER:
        raise ParameterError(f"cosine solves need a second-order operator, got {B.kind.value}")
    return _cached_solver(B.n, B.dim, B.h, B.centering)


def _unwrap(f):
    if isinstance(f, GridField):
        return f.values, (lambda x: GridField(x, f.h))
    return np.asarray(f, dtype=float), (lambda x: x)


def solve_shifted(B: TensorOperator, gamma: float, f, axes=None):
    """Solve ``(I + gamma B) x = f``; ``axes`` restricts B to a subset of axes."""
    values, wrap = _unwrap(f)
    return wrap(cosine_solver(B).solve(gamma, values, power=1, axes=axes))


def solve_shifted_squared(B: TensorOperator, gamma: float, f):
    """Solve ``(I + gamma B^2) x = f``."""
    values, wrap = _unwrap(f)
    return wrap(cosine_solver(B).solve(gamma, values, power=2))


def project_mean_zero(delta):
    """Remove the mean: ``delta - <1, delta>/N * 1``."""
    values, wrap = _unwrap(delta)
    return wrap(values - values.mean())


def solve_constrained_lagrangian(B: TensorOperator, gamma: float, f):
    """Solve ``M d + lam/N * 1 = f`` with ``<1, d> = 0`` and ``M = I + gamma B``.

    With ``g = M^{-1} 1/N`` the multiplier is ``lam = <1, M^{-1} f> / <1, g>``
    and ``d = M^{-1} f - lam g``.  For symmetric ``M`` this is the usual
    ``lam = <g, f> / <1/N, g>``.
    """
    values, wrap = _unwrap(f)
    solver = cosine_solver(B)
    g = solver.solve(gamma, np.full(values.shape, 1.0 / values.size))
    x = solver.solve(gamma, values)
    lam = x.sum() / g.sum()
    return wrap(x - lam * g)


@dataclass(frozen=True)
class HypothesisH:
    """Spectral-equivalence constants ``alpha <Bu,u> <= <Au,u> <= beta <Bu,u>``
    on the mean-zero subspace, plus the spectral quantities the stability
    bounds need.

    ``alpha``/``beta`` are the extreme eigenvalues of the pencil ``(A, B)``
    compressed to mean-zero vectors, ``Z^T A Z x = mu Z^T B Z x`` (all real
    for the operators built here).
    For self-adjoint ``A`` they are exactly the extreme Rayleigh quotients.
    ``alpha_sym``/``beta_sym`` report the Rayleigh-quotient bounds of the
    symmetric part of ``A`` in the inner product weighted by
    :meth:`CosineSolver.weights` (plain Euclidean on cell grids); with
    compact boundary closures that part can be indefinite.  ``asymmetry``
    is ``||A - A^T|| / ||A + A^T||`` (Frobenius).
    """

    alpha: float
    beta: float
    rho_A: float
    lambda_min_A: float
    lambda_min_B: float
    asymmetry: float = 0.0
    alpha_sym: float = float("nan")
    beta_sym: float = float("nan")


def mean_zero_basis(size: int) -> np.ndarray:
    """Orthonormal basis (columns) of the complement of the constant vector."""
    return scipy.linalg.null_space(np.ones((1, size)))


def _smallest_nonkernel(eigenvalues: np.ndarray) -> float:
    # the constant mode is the only (near-)kernel direction on these grids
    return float(np.sort(np.real(eigenvalues))[1])


def estimate_hypothesis_h(A: TensorOperator, B: TensorOperator) -> HypothesisH:
    """Dense estimate of the Hypothesis-H constants for the pair ``(A, B)``.

    Only for small grids (at most ``DIAGNOSTIC_MAX_UNKNOWNS`` unknowns).
    ``lambda_min_A``/``lambda_min_B`` are the smallest eigenvalues once the
    constant (kernel) mode is discarded.
    """
    if A.shape != B.shape:
        raise DimensionError("A and B must live on the same grid")
    if A.size > DIAGNOSTIC_MAX_UNKNOWNS:
        raise DiagnosticSizeError(
            f"{A.size} unknowns exceeds the dense diagnostic cap {DIAGNOSTIC_MAX_UNKNOWNS}"
        )
    a = A.dense()
    b = B.dense()
    w = cosine_solver(B).weights().ravel()
    # Restrict the pencil (A, B) to mean-zero vectors, discarding the
    # residual along the constant vector (the direction the mean projection
    # removes).  Z^T B Z is invertible because B x = c 1 forces c = 0.
    z = mean_zero_basis(A.size)
    pencil = np.real(scipy.linalg.eigvals(z.T @ a @ z, z.T @ b @ z))
    # Rayleigh quotients in the inner product that makes B symmetric
    wa = w[:, None] * a
    wb = w[:, None] * b
    sym = scipy.linalg.eigh(z.T @ (0.5 * (wa + wa.T)) @ z, z.T @ (0.5 * (wb + wb.T)) @ z,
                            eigvals_only=True)
    eig_a = np.linalg.eigvals(a)
    return HypothesisH(
        alpha=float(pencil.min()),
        beta=float(pencil.max()),
        rho_A=float(np.max(np.abs(eig_a))),
        lambda_min_A=_smallest_nonkernel(eig_a),
        lambda_min_B=_smallest_nonkernel(np.linalg.eigvals(b)),
        asymmetry=float(np.linalg.norm(a - a.T) / np.linalg.norm(a + a.T)),
        alpha_sym=float(sym[0]),
        beta_sym=float(sym[-1]),
    )
