"""Compact and second-order discretizations of -d2/dx2 with Neumann closures.

Every operator is a pair ``(P, Q)`` acting as ``v = P^{-1} Q u``.  All kinds
approximate the *negative* second derivative, so the assembled matrices are
(nearly) positive semi-definite.

Node placement
--------------
The compact closures are boundary-node formulas: the first and last unknowns
sit on ``x = 0`` and ``x = 1`` (``centering="vertex"``, ``h = 1/(n-1)``).  The
mirror-point second-order operator is consistent on a cell-centered grid
(``centering="cell"``, ``h = 1/n``).  When the second-order matrix is used as a
preconditioner for a compact operator it simply inherits the compact grid.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence, Union

import numpy as np
import scipy.sparse as sps
from scipy.linalg import lapack

from .errors import DimensionError, ParameterError, SizeError

__all__ = [
    "Kind",
    "ImplicitOperator",
    "TensorOperator",
    "GridField",
    "LELE_BOUNDARY",
    "build_lele",
    "build_cs2",
    "build_second_order",
    "build",
    "tensorize",
    "operator_pair",
    "apply",
]


class Kind(str, enum.Enum):
    LELE4 = "lele4"
    CS2 = "cs2"
    SECOND_ORDER = "second_order"

    @property
    def design_order(self) -> int:
        return 4 if self is Kind.LELE4 else 2

    @property
    def default_centering(self) -> str:
        return "cell" if self is Kind.SECOND_ORDER else "vertex"


# Fourth-order Neumann closure for the first row of Q (times h^2).  The
# coefficients make the row consistent with P's first row (1, 1/10) when
# u'(0) = 0; they sum to zero.
LELE_BOUNDARY = (
    Fraction(2681, 480),
    Fraction(-23, 3),
    Fraction(113, 40),
    Fraction(-13, 15),
    Fraction(59, 480),
)

_INTERIOR_COMPACT = (-1.2, 2.4, -1.2)  # (-6/5, 12/5, -6/5)
_MIN_SIZE = {Kind.LELE4: 8, Kind.CS2: 6, Kind.SECOND_ORDER: 3}


def default_spacing(n: int, centering: str) -> float:
    if centering == "vertex":
        return 1.0 / (n - 1)
    if centering == "cell":
        return 1.0 / n
    raise ParameterError(f"unknown centering {centering!r}")


@dataclass(frozen=True, eq=False)
class ImplicitOperator:
    """A 1D compact operator ``P v = Q u`` on ``n`` nodes of spacing ``h``.

    ``p_bands`` holds the three diagonals of P as rows ``(lower, diag,
    upper)``, each of length ``n`` (unused corners are zero).  ``q_bands`` is
    the banded Q as a sparse CSR matrix, already scaled by ``1/h**2``.
    P is LU-factorized once at construction.
    """

    p_bands: np.ndarray
    q_bands: sps.csr_matrix
    n: int
    h: float
    kind: Kind
    centering: str = "vertex"
    _factor: tuple = field(init=False, repr=False)

    def __post_init__(self):
        if self.kind is Kind.SECOND_ORDER:
            object.__setattr__(self, "_factor", ())
            return
        dl = np.ascontiguousarray(self.p_bands[0, 1:])
        d = np.ascontiguousarray(self.p_bands[1])
        du = np.ascontiguousarray(self.p_bands[2, :-1])
        *factor, info = lapack.dgttrf(dl, d, du)
        if info != 0:
            raise ParameterError(f"P is singular (dgttrf info={info})")
        object.__setattr__(self, "_factor", tuple(factor))

    @property
    def is_identity_p(self) -> bool:
        return self.kind is Kind.SECOND_ORDER

    def nodes(self) -> np.ndarray:
        i = np.arange(self.n, dtype=float)
        return (i + 0.5) * self.h if self.centering == "cell" else i * self.h

    def p_dense(self) -> np.ndarray:
        n = self.n
        return (
            np.diag(self.p_bands[1])
            + np.diag(self.p_bands[0, 1:], -1)
            + np.diag(self.p_bands[2, :-1], 1)
        ).reshape(n, n)

    def q_dense(self) -> np.ndarray:
        return self.q_bands.toarray()

    def dense(self) -> np.ndarray:
        """The formal matrix ``P^{-1} Q``."""
        return self.solve_p(self.q_dense())

    def solve_p(self, rhs: np.ndarray, axis: int = 0) -> np.ndarray:
        """Solve ``P x = rhs`` along ``axis`` (all other axes are batched)."""
        if self.is_identity_p:
            return np.array(rhs, dtype=float, copy=True)
        moved = np.moveaxis(np.asarray(rhs, dtype=float), axis, 0)
        shape = moved.shape
        b = np.asfortranarray(moved.reshape(self.n, -1))
        x, info = lapack.dgttrs(*self._factor, b)
        if info != 0:
            raise ParameterError(f"tridiagonal solve failed (dgttrs info={info})")
        return np.moveaxis(x.reshape(shape), 0, axis)

    def apply(self, u: np.ndarray, axis: int = 0) -> np.ndarray:
        """Return ``P^{-1} Q u`` along ``axis``."""
        u = np.asarray(u, dtype=float)
        if u.shape[axis] != self.n:
            raise DimensionError(
                f"axis {axis} has length {u.shape[axis]}, operator expects {self.n}"
            )
        moved = np.moveaxis(u, axis, 0)
        qu = (self.q_bands @ moved.reshape(self.n, -1)).reshape(moved.shape)
        return self.solve_p(np.moveaxis(qu, 0, axis), axis=axis)


def _tridiag_bands(n: int, lower: float, diag: float, upper: float) -> np.ndarray:
    bands = np.empty((3, n))
    bands[0] = lower
    bands[1] = diag
    bands[2] = upper
    bands[0, 0] = 0.0
    bands[2, -1] = 0.0
    return bands


def _interior_q(n: int, stencil: Sequence[float]) -> sps.lil_matrix:
    q = sps.lil_matrix((n, n))
    lo, mid, hi = stencil
    for i in range(1, n - 1):
        q[i, i - 1] = lo
        q[i, i] = mid
        q[i, i + 1] = hi
    return q


def _check(kind: Kind, n: int, h: float) -> None:
    if n < _MIN_SIZE[kind]:
        raise SizeError(f"{kind.value} needs n >= {_MIN_SIZE[kind]}, got n={n}")
    if not h > 0:
        raise ParameterError(f"grid spacing must be positive, got h={h}")


def build_lele(n: int, h: float | None = None) -> ImplicitOperator:
    """Fourth-order compact scheme with a fourth-order Neumann closure."""
    h = default_spacing(n, "vertex") if h is None else float(h)
    _check(Kind.LELE4, n, h)
    p = _tridiag_bands(n, 0.1, 1.0, 0.1)
    q = _interior_q(n, _INTERIOR_COMPACT)
    a = [float(c) for c in LELE_BOUNDARY]
    for j, c in enumerate(a):
        q[0, j] = c
        q[n - 1, n - 1 - j] = c
    return ImplicitOperator(p, (q / h**2).tocsr(), n, h, Kind.LELE4, "vertex")


def build_cs2(n: int, h: float | None = None) -> ImplicitOperator:
    """Compact scheme, fourth order inside and second order at the boundary.

    The boundary rows keep the explicit part unchanged, so Q has zero row and
    column sums and ``Q 1 = 0`` holds exactly.
    """
    h = default_spacing(n, "vertex") if h is None else float(h)
    _check(Kind.CS2, n, h)
    p = _tridiag_bands(n, 0.1, 1.0, 0.1)
    p[1, 0] = p[1, -1] = 0.4
    p[2, 0] = 0.2
    p[0, -1] = 0.2
    q = _interior_q(n, _INTERIOR_COMPACT)
    q[0, 0], q[0, 1] = 1.2, -1.2
    q[n - 1, n - 2], q[n - 1, n - 1] = -1.2, 1.2
    return ImplicitOperator(p, (q / h**2).tocsr(), n, h, Kind.CS2, "vertex")


def build_second_order(
    n: int, h: float | None = None, centering: str = "cell"
) -> ImplicitOperator:
    """Three-point operator with mirror-point Neumann closure.

    Cell-centered nodes (the mirror line halfway between the first node and
    its ghost) give boundary rows ``(1, -1)/h^2``: symmetric positive
    semi-definite, diagonalized by the type-II cosine transform.  Vertex nodes
    (the mirror line through the boundary node) give ``(2, -2)/h^2``, which is
    symmetric for the trapezoidal weights and diagonalized by the type-I
    cosine transform.  Either way the kernel is ``span{1}``.
    """
    h = default_spacing(n, centering) if h is None else float(h)
    _check(Kind.SECOND_ORDER, n, h)
    c = {"cell": 1.0, "vertex": 2.0}.get(centering)
    if c is None:
        raise ParameterError(f"unknown centering {centering!r}")
    q = _interior_q(n, (-1.0, 2.0, -1.0))
    q[0, 0], q[0, 1] = c, -c
    q[n - 1, n - 2], q[n - 1, n - 1] = -c, c
    p = _tridiag_bands(n, 0.0, 1.0, 0.0)
    return ImplicitOperator(p, (q / h**2).tocsr(), n, h, Kind.SECOND_ORDER, centering)


def build(kind: Kind | str, n: int, h: float | None = None,
          centering: str | None = None) -> ImplicitOperator:
    """Dispatch on ``kind``; ``centering`` only applies to the second-order kind."""
    kind = Kind(kind)
    if kind is Kind.LELE4:
        return build_lele(n, h)
    if kind is Kind.CS2:
        return build_cs2(n, h)
    return build_second_order(n, h, centering or kind.default_centering)


@dataclass(frozen=True, eq=False)
class TensorOperator:
    """Sum of 1D operators, one per axis: ``A = A_x (+) A_y (+) A_z``."""

    axis_operators: tuple
    dim: int

    def __post_init__(self):
        ops = tuple(self.axis_operators)
        object.__setattr__(self, "axis_operators", ops)
        if self.dim not in (1, 2, 3) or len(ops) != self.dim:
            raise DimensionError(f"need one axis operator per dimension, dim={self.dim}")
        first = ops[0]
        for op in ops[1:]:
            if (op.kind, op.h, op.n, op.centering) != (first.kind, first.h, first.n, first.centering):
                raise DimensionError("axis operators must share kind, n, h and centering")

    @property
    def n(self) -> int:
        return self.axis_operators[0].n

    @property
    def h(self) -> float:
        return self.axis_operators[0].h

    @property
    def kind(self) -> Kind:
        return self.axis_operators[0].kind

    @property
    def centering(self) -> str:
        return self.axis_operators[0].centering

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.dim

    @property
    def size(self) -> int:
        return self.n**self.dim

    def nodes(self) -> list:
        """Coordinate arrays (``indexing="ij"``) of the grid nodes."""
        x = self.axis_operators[0].nodes()
        return np.meshgrid(*([x] * self.dim), indexing="ij")

    def _check_shape(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != self.shape:
            if u.size == self.size and u.ndim == 1:
                return u.reshape(self.shape)
            raise DimensionError(f"field shape {u.shape} does not match grid {self.shape}")
        return u

    def apply_axis(self, u: np.ndarray, axis: int) -> np.ndarray:
        u = self._check_shape(u)
        return self.axis_operators[axis].apply(u, axis=axis)

    def __call__(self, u: np.ndarray) -> np.ndarray:
        u = self._check_shape(u)
        out = self.axis_operators[0].apply(u, axis=0)
        for axis in range(1, self.dim):
            out += self.axis_operators[axis].apply(u, axis=axis)
        return out

    def dense(self) -> np.ndarray:
        """Assemble the full ``n^dim x n^dim`` matrix (C-order flattening)."""
        blocks = [op.dense() for op in self.axis_operators]
        eye = np.eye(self.n)
        total = np.zeros((self.size, self.size))
        for axis, block in enumerate(blocks):
            term = np.ones((1, 1))
            for k in range(self.dim):
                term = np.kron(term, block if k == axis else eye)
            total += term
        return total

    def sparse_q(self) -> sps.csr_matrix:
        """Kronecker sum of the Q matrices (only meaningful when P = I)."""
        eye = sps.identity(self.n, format="csr")
        total = sps.csr_matrix((self.size, self.size))
        for axis, op in enumerate(self.axis_operators):
            term = sps.identity(1, format="csr")
            for k in range(self.dim):
                term = sps.kron(term, op.q_bands if k == axis else eye, format="csr")
            total = total + term
        return total.tocsr()


def tensorize(op: ImplicitOperator, dim: int) -> TensorOperator:
    return TensorOperator((op,) * dim, dim)


def operator_pair(kind: Kind | str, n: int, dim: int = 1, h: float | None = None):
    """Return ``(A, B)``: the chosen operator and its second-order preconditioner
    on the same grid (same ``n``, ``h`` and node placement)."""
    a1 = build(kind, n, h)
    b1 = a1 if a1.kind is Kind.SECOND_ORDER else build_second_order(n, a1.h, a1.centering)
    return tensorize(a1, dim), tensorize(b1, dim)


@dataclass(frozen=True)
class GridField:
    """Values on a uniform ``n^dim`` grid of spacing ``h``."""

    values: np.ndarray
    h: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim not in (1, 2, 3) or len(set(v.shape)) != 1:
            raise DimensionError(f"values must be an n, n x n or n x n x n array, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ParameterError("field contains NaN or Inf")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.ndim

    @classmethod
    def on(cls, op: TensorOperator, values) -> "GridField":
        return cls(op._check_shape(values), op.h)


FieldLike = Union[GridField, np.ndarray]


def apply(op: TensorOperator, u: FieldLike) -> FieldLike:
    """Apply a tensor operator to a field; returns the same type it was given."""
    if isinstance(u, GridField):
        if u.dim != op.dim or u.n != op.n:
            raise DimensionError(
                f"field is {u.dim}D with n={u.n}, operator is {op.dim}D with n={op.n}"
            )
        return GridField(op(u.values), u.h)
    return op(u)
