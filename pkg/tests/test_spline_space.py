import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.interpolate import BSpline

from serre_galerkin import SizingError, SolverBreakdown
from serre_galerkin.semidiscrete import project_l2
from serre_galerkin.spline_space import (
    CyclicBandedMatrix,
    assemble_load,
    assemble_weighted_gram,
    bspline_pieces,
    eval_field,
    factor_solve,
    interpolate,
    make_space,
)


X = sympy.Symbol("x", real=True)


def sympy_bspline_piece(r, cell):
    """Polynomial of the order-r cardinal B-spline on ``[cell, cell + 1]`` (truncated powers)."""
    if cell < 0 or cell >= r:
        return sympy.Integer(0)
    return sum((-1) ** k * sympy.binomial(r, k) * (X - k) ** (r - 1) for k in range(cell + 1)) / sympy.factorial(r - 1)


def exact_gram(r, deriv):
    """Exact ``int B^(d)(x) B^(d)(x - m) dx`` for m = 0..r-1 on unit spacing."""
    out = []
    for m in range(r):
        total = sympy.Integer(0)
        for cell in range(m, r):
            a = sympy.diff(sympy_bspline_piece(r, cell), X, deriv)
            b = sympy.diff(sympy_bspline_piece(r, cell - m), X, deriv).subs(X, X - m)
            total += sympy.integrate(sympy.expand(a * b), (X, cell, cell + 1))
        out.append(total)
    return out


def test_make_space_examples():
    sp = make_space(150, 600, 4)
    assert sp.h == 0.5 and sp.dim == 600
    sp = make_space(0.5, 8, 3)
    assert sp.dim == 8 and sp.r == 3
    with pytest.raises(SizingError):
        make_space(1, 4, 4)


@pytest.mark.parametrize("r,N", [(2, 10), (7, 20), (4, 7), (3, 5)])
def test_make_space_rejects(r, N):
    with pytest.raises(SizingError):
        make_space(1.0, N, r)


@pytest.mark.parametrize("r", [3, 4, 5, 6])
def test_mother_spline_pieces_match_scipy(r):
    b = BSpline.basis_element(np.arange(r + 1.0), extrapolate=False)
    pieces = bspline_pieces(r)
    s = np.linspace(0, 1, 11)[:-1]
    for a in range(r):
        np.testing.assert_allclose(np.polynomial.polynomial.polyval(s, pieces[a]), b(s + a), atol=1e-14)


@given(
    r=st.integers(3, 6),
    N=st.integers(12, 40),
    x=st.lists(st.floats(-50, 50, allow_nan=False), min_size=1, max_size=20),
)
@settings(max_examples=60, deadline=None)
def test_partition_of_unity_and_nonnegativity(r, N, x):
    sp = make_space(2.5, N, r)
    vals = sp.basis_values(np.array(x))
    assert np.all(vals >= -1e-15)
    np.testing.assert_allclose(vals.sum(axis=1), 1.0, atol=1e-13)
    np.testing.assert_allclose(sp.basis_values(np.array(x), 1).sum(axis=1), 0.0, atol=1e-11)


def test_partition_of_unity_at_quadrature_nodes():
    rng = np.random.default_rng(0)
    for r in (3, 4, 5):
        sp = make_space(3.0, 30, r)
        np.testing.assert_allclose(sp.quad_values(np.ones(30)), 1.0, atol=1e-13)
        x = rng.uniform(-3, 3, 10_000)
        np.testing.assert_allclose(sp.basis_values(x).sum(axis=1), 1.0, atol=1e-13)


def test_field_periodicity_and_constants():
    sp = make_space(1.0, 16, 4)
    f = sp.field(np.random.default_rng(1).normal(size=16))
    x = np.linspace(-1, 1, 37)
    np.testing.assert_allclose(f(x + 2.0), f(x), atol=1e-13)
    np.testing.assert_allclose(f(x - 6.0, 1), f(x, 1), atol=1e-11)
    one = sp.constant(1.0)
    assert eval_field(one, 0.123) == pytest.approx(1.0, abs=1e-15)
    assert eval_field(one, 0.123, 1) == pytest.approx(0.0, abs=1e-13)
    with pytest.raises(ValueError):
        eval_field(one, 0.0, 4)


def test_derivatives_match_finite_differences():
    sp = make_space(2.0, 20, 5)
    f = sp.field(np.sin(np.arange(20.0)))
    x = np.linspace(-1.9, 1.9, 17) + 0.013
    d = 1e-5
    for k in (1, 2, 3):
        fd = (f(x + d, k - 1) - f(x - d, k - 1)) / (2 * d)
        np.testing.assert_allclose(f(x, k), fd, rtol=1e-6, atol=1e-6)


@pytest.mark.parametrize("r", [3, 4, 5])
def test_gram_entries_match_exact_values(r):
    # oracle: exact rational Gram values of the cardinal B-spline
    N, L = 24, 3.0
    sp = make_space(L, N, r)
    h = sp.h
    mass = exact_gram(r, 0)
    stiff = exact_gram(r, 1)
    M = assemble_weighted_gram(sp, 1.0, 0, 0)
    K = assemble_weighted_gram(sp, 1.0, 1, 1)
    for m in range(r):
        np.testing.assert_allclose(M.upper[m], float(mass[m]) * h, atol=1e-13)
        np.testing.assert_allclose(K.upper[m], float(stiff[m]) / h, atol=1e-12)


def test_gram_row_sums_and_circulant():
    sp = make_space(5.0, 40, 4)
    M = assemble_weighted_gram(sp, 1.0, 0, 0)
    K = assemble_weighted_gram(sp, 1.0, 1, 1)
    np.testing.assert_allclose(M.to_dense().sum(axis=1), sp.h, atol=1e-14)
    np.testing.assert_allclose(K.to_dense().sum(axis=1), 0.0, atol=1e-13)
    # translation invariance for constant weights
    for A in (M, K):
        assert np.ptp(A.band, axis=1).max() < 1e-13
    assert M.is_symmetric(1e-15) and K.is_symmetric(1e-13)


def test_cubed_unit_weight_equals_stiffness():
    sp = make_space(5.0, 40, 4)
    one = sp.constant(1.0)
    w3 = sp.quad_values(one.c) ** 3
    np.testing.assert_allclose(assemble_weighted_gram(sp, w3, 1, 1).band, assemble_weighted_gram(sp, 1.0, 1, 1).band, atol=1e-14)


def test_mixed_gram_is_transpose_pair():
    sp = make_space(3.0, 18, 4)
    w = lambda x: 2.0 + np.cos(np.pi * x / 3.0)  # noqa: E731
    A = assemble_weighted_gram(sp, w, 1, 0).to_dense()
    B = assemble_weighted_gram(sp, w, 0, 1).to_dense()
    np.testing.assert_allclose(A, B.T, atol=1e-14)
    # (phi_j', phi_i) with w = 1 is skew
    C = assemble_weighted_gram(sp, 1.0, 1, 0).to_dense()
    np.testing.assert_allclose(C, -C.T, atol=1e-14)


def test_weighted_gram_against_dense_quadrature():
    sp = make_space(2.0, 16, 4)
    w = lambda x: 1.5 + np.sin(np.pi * x / 2.0) ** 2  # noqa: E731
    xs, ws = np.polynomial.legendre.leggauss(20)
    pts = np.concatenate([-2 + sp.h * (e + (xs + 1) / 2) for e in range(16)])
    wts = np.tile(ws * sp.h / 2, 16)
    B = sp.basis_values(pts, 1)
    ref = (B * (w(pts) * wts)[:, None]).T @ B
    np.testing.assert_allclose(assemble_weighted_gram(sp, w, 1, 1).to_dense(), ref, atol=1e-9)


def test_load_vector_examples():
    sp = make_space(4.0, 32, 4)
    np.testing.assert_allclose(assemble_load(sp, 1.0), sp.h, atol=1e-14)
    np.testing.assert_allclose(assemble_load(sp, 1.0, dv=1), 0.0, atol=1e-13)
    k = 7
    e = np.zeros(32)
    e[k] = 1.0
    phi_k = sp.field(e)
    np.testing.assert_allclose(assemble_load(sp, phi_k), sp.mass_matrix.to_dense()[:, k], atol=1e-15)


def test_factor_solve_examples():
    sp = make_space(4.0, 32, 4)
    M = sp.mass_matrix
    np.testing.assert_allclose(factor_solve(M, M @ np.ones(32)), 1.0, atol=1e-12)
    with pytest.raises(SolverBreakdown):
        factor_solve(assemble_weighted_gram(sp, -1.0, 0, 0), np.ones(32))


@given(st.integers(0, 2**31 - 1), st.integers(3, 6), st.integers(12, 60))
@settings(max_examples=40, deadline=None)
def test_random_spd_round_trip(seed, r, N):
    rng = np.random.default_rng(seed)
    sp = make_space(1.0, N, r)
    w0 = rng.uniform(0.2, 3.0, size=sp.x_quad.shape)
    w1 = rng.uniform(0.2, 3.0, size=sp.x_quad.shape)
    from serre_galerkin import kernels

    A = CyclicBandedMatrix.from_symmetric(kernels.assemble_sym(w0, w1, sp.table(0), sp.table(1), sp.wq))
    b = rng.normal(size=N)
    x = factor_solve(A, b)
    assert np.abs(A @ x - b).max() <= 1e-10 * np.abs(b).max()
    np.testing.assert_allclose(A.to_dense() @ x, b, atol=1e-10 * np.abs(b).max())


def test_interpolation_reproduces_splines():
    for r in (3, 4, 5, 6):
        sp = make_space(2.0, 24, r)
        f = sp.field(np.cos(np.arange(24.0)))
        g = interpolate(sp, f)
        np.testing.assert_allclose(g.c, f.c, atol=1e-12)


def scipy_periodic_projection(L, N, fun, x):
    """L2 projection onto periodic cubic splines built with scipy's B-splines."""
    h = 2 * L / N
    xg, wg = np.polynomial.legendre.leggauss(12)
    xs = np.concatenate([(-L + h * i) + h * (xg + 1) / 2 for i in range(N)])
    ws = np.tile(wg * h / 2, N)

    def basis(j, y):
        b = BSpline.basis_element(-L + h * (j + np.arange(5)), extrapolate=False)
        return sum(np.nan_to_num(b(y + s)) for s in (-2 * L, 0.0, 2 * L))

    B = np.array([basis(j, xs) for j in range(N)])
    c = np.linalg.solve((B * ws) @ B.T, (B * ws) @ fun(xs))
    return sum(c[j] * basis(j, np.atleast_1d(x)) for j in range(N))


def test_projection_value_matches_independent_construction():
    sp = make_space(1.0, 64, 4)
    f = project_l2(sp, lambda x: np.sin(np.pi * x))
    ref = scipy_periodic_projection(1.0, 64, lambda x: np.sin(np.pi * x), 0.3)[0]
    assert f(0.3) == pytest.approx(ref, abs=1e-12)


@pytest.mark.xfail(strict=True, reason="the projection error at x=0.3 is 7.4e-8 (independently confirmed), above 1e-8")
def test_projection_value_within_stated_tolerance():
    sp = make_space(1.0, 64, 4)
    f = project_l2(sp, lambda x: np.sin(np.pi * x))
    assert abs(f(0.3) - np.sin(0.3 * np.pi)) <= 1e-8
