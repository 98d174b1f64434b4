import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import grid_weights
from rssphase.errors import DiagnosticSizeError, DimensionError, ParameterError
from rssphase.linalg import (
    CosineSolver,
    cosine_solver,
    estimate_hypothesis_h,
    project_mean_zero,
    solve_constrained_lagrangian,
    solve_shifted,
    solve_shifted_squared,
)
from rssphase.operators import (
    GridField,
    ImplicitOperator,
    Kind,
    build_second_order,
    operator_pair,
    tensorize,
)

PAIRS = [("second_order", 8), ("lele4", 9)]  # cell grid, vertex grid


def b_for(kind, n, dim):
    return operator_pair(kind, n, dim)[1]


@pytest.mark.parametrize("kind,n", PAIRS)
@pytest.mark.parametrize("dim", [1, 2, 3])
def test_solve_shifted_matches_dense(kind, n, dim, rng):
    B = b_for(kind, n, dim)
    f = rng.standard_normal(B.shape)
    gamma = 0.37
    x = solve_shifted(B, gamma, f)
    ref = np.linalg.solve(np.eye(B.size) + gamma * B.dense(), f.ravel())
    assert np.abs(x.ravel() - ref).max() <= 1e-10 * np.abs(f).max()


@pytest.mark.parametrize("kind,n", PAIRS)
def test_solve_shifted_squared_matches_dense(kind, n, rng):
    B = b_for(kind, n, 2)
    f = rng.standard_normal(B.shape)
    gamma = 1e-4
    x = solve_shifted_squared(B, gamma, f)
    b = B.dense()
    ref = np.linalg.solve(np.eye(B.size) + gamma * b @ b, f.ravel())
    assert np.abs(x.ravel() - ref).max() <= 1e-10 * np.abs(f).max()


@pytest.mark.parametrize("kind,n", PAIRS)
def test_residual_contract_large_gamma(kind, n, rng):
    B = b_for(kind, 4 * n, 2)
    f = rng.standard_normal(B.shape)
    for gamma in (1e-6, 1.0, 1e3):
        x = solve_shifted(B, gamma, f)
        assert np.abs(x + gamma * B(x) - f).max() <= 1e-10 * np.abs(f).max()


def test_gamma_zero_is_identity(rng):
    B = b_for("second_order", 8, 2)
    f = rng.standard_normal(B.shape)
    assert np.array_equal(solve_shifted(B, 0.0, f), f)
    assert np.array_equal(solve_shifted_squared(B, 0.0, f), f)


@pytest.mark.parametrize("kind,n", PAIRS)
def test_kernel_passes_through(kind, n):
    B = b_for(kind, n, 2)
    c = np.full(B.shape, 2.5)
    assert np.allclose(solve_shifted(B, 3.0, c), c, atol=1e-13)
    assert np.allclose(solve_shifted_squared(B, 3.0, c), c, atol=1e-13)


def test_negative_gamma_rejected():
    B = b_for("second_order", 8, 1)
    with pytest.raises(ParameterError):
        solve_shifted(B, -1e-3, np.zeros(8))


def test_shape_mismatch_rejected():
    B = b_for("second_order", 8, 2)
    with pytest.raises(DimensionError):
        solve_shifted(B, 1.0, np.zeros((9, 9)))


def test_cosine_solver_needs_second_order_operator():
    A, _ = operator_pair("lele4", 9)
    with pytest.raises(ParameterError):
        cosine_solver(A)


@pytest.mark.parametrize("centering", ["cell", "vertex"])
def test_solver_eigenvalues(centering):
    n = 12
    op = build_second_order(n, centering=centering)
    s = CosineSolver.create(n, 1, op.h, centering)
    lam = s.eigenvalues_per_axis
    assert lam[0] == 0.0
    assert np.all(np.diff(lam) > 0)
    dense = np.sort(np.real(np.linalg.eigvals(op.q_dense())))
    assert np.allclose(lam, dense, rtol=1e-12, atol=1e-9)


@pytest.mark.parametrize("centering,n", [("cell", 16), ("vertex", 17)])
@pytest.mark.parametrize("dim", [1, 2, 3])
def test_transform_roundtrip(centering, n, dim, rng):
    op = build_second_order(n, centering=centering)
    s = cosine_solver(tensorize(op, dim))
    f = rng.standard_normal((n,) * dim)
    assert np.abs(s.inverse(s.forward(f)) - f).max() < 1e-13


@pytest.mark.parametrize("kind,n", PAIRS)
def test_solve_preserves_weighted_mean(kind, n, rng):
    B = b_for(kind, n, 2)
    w = grid_weights(B)
    f = rng.standard_normal(B.shape)
    x = solve_shifted(B, 0.8, f)
    assert abs(np.sum(w * x) - np.sum(w * f)) < 1e-12 * np.abs(f).sum()


@pytest.mark.parametrize("kind,n", PAIRS)
def test_shift_dominance(kind, n, rng):
    B = b_for(kind, n, 2)
    w = grid_weights(B)
    for gamma in (0.0, 0.1, 10.0):
        u = rng.standard_normal(B.shape)
        lhs = np.sum(w * (u + gamma * B(u)) * u)
        assert lhs >= np.sum(w * u * u) * (1 - 1e-12)


def test_gridfield_in_gridfield_out(rng):
    B = b_for("second_order", 8, 2)
    f = GridField(rng.standard_normal((8, 8)), B.h)
    out = solve_shifted(B, 1.0, f)
    assert isinstance(out, GridField)
    assert isinstance(project_mean_zero(f), GridField)


def test_project_mean_zero(rng):
    f = rng.standard_normal((16, 16))
    g = project_mean_zero(f)
    assert abs(g.sum()) <= 1e-13 * f.size * np.abs(f).max()
    assert np.ptp(f - g) < 1e-14
    assert np.array_equal(project_mean_zero(np.full(5, 4.0)), np.zeros(5))
    z = g.copy()
    assert np.allclose(project_mean_zero(z), z, atol=1e-15)


def dense_kkt(B, gamma, f):
    n = B.size
    m = np.eye(n) + gamma * B.dense()
    kkt = np.zeros((n + 1, n + 1))
    kkt[:n, :n] = m
    kkt[:n, n] = 1.0 / n
    kkt[n, :n] = 1.0 / n
    sol = np.linalg.solve(kkt, np.append(f.ravel(), 0.0))
    return sol[:n].reshape(f.shape), sol[n]


@pytest.mark.parametrize("kind,n", PAIRS)
@pytest.mark.parametrize("dim", [1, 2])
def test_lagrangian_matches_dense_kkt(kind, n, dim, rng):
    B = b_for(kind, n, dim)
    f = rng.standard_normal(B.shape)
    d = solve_constrained_lagrangian(B, 0.25, f)
    ref, _ = dense_kkt(B, 0.25, f)
    assert np.abs(d - ref).max() < 1e-10
    assert abs(d.sum()) < 1e-12


def test_lagrangian_equals_projection_for_symmetric_b(rng):
    B = b_for("second_order", 16, 1)
    f = project_mean_zero(rng.standard_normal(16))
    d = solve_constrained_lagrangian(B, 0.5, f)
    p = project_mean_zero(solve_shifted(B, 0.5, f))
    assert np.abs(d - p).max() < 1e-12


@pytest.mark.parametrize("kind,n", PAIRS)
def test_lagrangian_of_constant_is_zero(kind, n):
    B = b_for(kind, n, 2)
    assert np.abs(solve_constrained_lagrangian(B, 0.5, np.ones(B.shape))).max() < 1e-13


# -- Hypothesis H -------------------------------------------------------------


def test_identical_pair_gives_unit_constants():
    A, B = operator_pair("second_order", 12, 1)
    hyp = estimate_hypothesis_h(A, B)
    assert hyp.alpha == pytest.approx(1.0, abs=1e-10)
    assert hyp.beta == pytest.approx(1.0, abs=1e-10)
    assert hyp.asymmetry == 0.0
    assert hyp.lambda_min_A == pytest.approx(hyp.lambda_min_B)


def test_scaled_pair():
    _, B = operator_pair("second_order", 10, 2)
    op = B.axis_operators[0]
    doubled = ImplicitOperator(op.p_bands, 2 * op.q_bands, op.n, op.h, Kind.SECOND_ORDER, op.centering)
    hyp = estimate_hypothesis_h(tensorize(doubled, 2), B)
    assert hyp.alpha == pytest.approx(2.0, abs=1e-10)
    assert hyp.beta == pytest.approx(2.0, abs=1e-10)
    assert hyp.rho_A == pytest.approx(2 * np.abs(np.linalg.eigvals(B.dense())).max())


def test_lele_beta_range():
    A, B = operator_pair("lele4", 32)
    hyp = estimate_hypothesis_h(A, B)
    assert 1.0 < hyp.beta < 2.6
    assert 0 < hyp.alpha <= hyp.beta
    assert hyp.rho_A >= hyp.lambda_min_A > 0
    assert hyp.lambda_min_B > 0
    assert hyp.asymmetry < 0.5


def pencil_oracle(A, B):
    """Generalized eigenvalues of (A, B) on mean-zero vectors, from the QZ
    decomposition of the bordered pencil (the constant mode sent to infinity)."""
    a, b = A.dense(), B.dense()
    n = A.size
    ones = np.ones((n, 1))
    big_a = np.block([[a, ones], [ones.T, np.zeros((1, 1))]])
    big_b = np.block([[b, np.zeros((n, 1))], [np.zeros((1, n)), np.zeros((1, 1))]])
    ev = scipy.linalg.eigvals(big_a, big_b)
    ev = ev[np.isfinite(ev)]
    return np.sort(np.real(ev))


@pytest.mark.parametrize("kind,n", [("cs2", 16), ("lele4", 12)])
def test_pencil_constants_match_bordered_oracle(kind, n):
    A, B = operator_pair(kind, n)
    hyp = estimate_hypothesis_h(A, B)
    ev = pencil_oracle(A, B)
    ev = ev[np.abs(ev) < 1e6]
    assert hyp.alpha == pytest.approx(ev.min(), rel=1e-6)
    assert hyp.beta == pytest.approx(ev.max(), rel=1e-6)


def test_cs2_spectral_quantities():
    A, B = operator_pair("cs2", 16)
    hyp = estimate_hypothesis_h(A, B)
    ev = np.sort(np.real(np.linalg.eigvals(A.dense())))
    assert hyp.rho_A == pytest.approx(np.abs(ev).max())
    assert hyp.lambda_min_A == pytest.approx(ev[1])
    assert abs(ev[0]) < 1e-9


def test_weighted_symmetric_bounds_hold(rng):
    A, B = operator_pair("cs2", 16)
    hyp = estimate_hypothesis_h(A, B)
    w = grid_weights(B)
    for _ in range(100):
        u = project_mean_zero(rng.standard_normal(16))
        qa = np.sum(w * A(u) * u)
        qb = np.sum(w * B(u) * u)
        assert hyp.beta_sym * qb >= qa - 1e-9 * abs(qa)
        assert hyp.alpha_sym * qb <= qa + 1e-9 * abs(qa)


def test_rayleigh_bound_for_symmetric_pair(rng):
    A, B = operator_pair("second_order", 16, 2)
    hyp = estimate_hypothesis_h(A, B)
    for _ in range(100):
        u = project_mean_zero(rng.standard_normal(A.shape))
        assert hyp.beta * np.vdot(B(u), u) >= np.vdot(A(u), u) * (1 - 1e-12)


def test_size_cap():
    A, B = operator_pair("second_order", 17, 3)
    with pytest.raises(DiagnosticSizeError):
        estimate_hypothesis_h(A, B)


def test_grid_mismatch():
    A, _ = operator_pair("second_order", 8)
    _, B = operator_pair("second_order", 9)
    with pytest.raises(DimensionError):
        estimate_hypothesis_h(A, B)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 1e4), st.integers(0, 2**31 - 1))
def test_solve_left_inverse_property(gamma, seed):
    B = b_for("lele4", 9, 2)
    f = np.random.default_rng(seed).standard_normal(B.shape)
    x = solve_shifted(B, gamma, f)
    assert np.abs(x + gamma * B(x) - f).max() <= 1e-10 * np.abs(f).max()
