import numpy as np
import pytest
from numpy.polynomial import chebyshev as C

from annular_spectral.banded import bordered_solve
from annular_spectral.chebfourier import (ChebFourierBasis, boundary_rows, cf_assemble, cf_evaluate,
                                          cf_expand, cf_expand_values, cf_mode_core, cf_operators,
                                          cf_radial_derivative, cf_rhs)
from annular_spectral.annulus import column_index
from annular_spectral.classical import Ultraspherical2, clenshaw_eval
from annular_spectral.errors import GridMismatch, InvalidParameter
from annular_spectral.problems import FORCED_LAMBDA_R, sin100x
from annular_spectral.solvers import solve_chebfourier

C2 = Ultraspherical2()


def t_coeffs_of(fun, basis, deg):
    """Chebyshev T coefficients in s of a radial function (interpolation)."""
    s = np.cos(np.pi * (np.arange(deg + 1) + 0.5) / (deg + 1))
    return C.chebfit(s, fun(basis.to_r(s)), deg)


def test_map_endpoints():
    B = ChebFourierBasis(0.3, 4)
    assert B.to_s(0.3) == -1.0 and B.to_s(1.0) == 1.0
    assert B.to_r(-1.0) == 0.3 and B.to_r(1.0) == 1.0
    with pytest.raises(InvalidParameter):
        ChebFourierBasis(1.0, 4)


def test_operator_bandwidths():
    D, R, X = cf_operators(ChebFourierBasis(0.5, 10))
    assert D.lower_bw == 0 and D.upper_bw <= 4
    assert R.lower_bw == 0 and R.upper_bw <= 4
    assert X.lower_bw == 1 and X.upper_bw == 1


def test_D_kills_constants():
    D, _, _ = cf_operators(ChebFourierBasis(0.5, 10))
    assert np.all(D.todense()[:, 0] == 0)


def test_D_identity_T5():
    B = ChebFourierBasis(0.5, 10)
    D, R, X = cf_operators(B)
    e = np.zeros(12)
    e[5] = 1.0
    # (r^2 d_rr + r d_r) T5(s(r)) from the chain rule
    c = np.zeros(6)
    c[5] = 1.0
    s = B.to_s(0.7)
    exact = 0.49 * B.scale**2 * C.chebval(s, C.chebder(c, 2)) + 0.7 * B.scale * C.chebval(s, C.chebder(c))
    assert exact == pytest.approx(175.728, abs=1e-9)
    assert clenshaw_eval(C2, D.todense() @ e, s) == pytest.approx(exact, rel=1e-12)


def test_operator_identities_sampled(rng):
    B = ChebFourierBasis(0.4, 12)
    n = 14
    D, R, X = (M.todense() for M in cf_operators(B, n))
    r = rng.uniform(0.4, 1.0, 10)
    s = B.to_s(r)
    h = 1e-4
    for k in range(n - 6):
        e = np.zeros(n)
        e[k] = 1.0
        T = lambda rr: C.chebval(B.to_s(rr), e)
        fd = r**2 * (T(r + h) - 2 * T(r) + T(r - h)) / h**2 + r * (T(r + h) - T(r - h)) / (2 * h)
        assert np.max(np.abs(clenshaw_eval(C2, D @ e, s) - fd)) <= 1e-7 * max(1, np.abs(fd).max()) * 1e2
        np.testing.assert_allclose(clenshaw_eval(C2, R @ e, s), T(r), atol=1e-11)
        np.testing.assert_allclose(clenshaw_eval(C2, X @ (R @ e), s), r * T(r), atol=1e-11)


def test_boundary_rows():
    np.testing.assert_array_equal(boundary_rows(5), [[1, -1, 1, -1, 1], [1, 1, 1, 1, 1]])


@pytest.mark.parametrize("lam,bw", [(0.0, 5), (1.0, 9)])
@pytest.mark.parametrize("m", [0, 3, 10])
def test_assembled_structure(lam, bw, m):
    B = ChebFourierBasis(0.5, 20)
    S = cf_assemble(B, m, lam)
    assert S.size == 22 and S.top_rows.shape == (2, 22)
    lo, up = S.core.effective_bandwidths()
    assert lo + up + 1 <= bw
    assert (lo, up) == ((0, 4) if lam == 0 else (2, 6))


def test_rhs_zero_and_linear(rng):
    B = ChebFourierBasis(0.5, 8)
    np.testing.assert_array_equal(cf_rhs(B, np.zeros(9)), 0.0)
    f, g = rng.standard_normal(9), rng.standard_normal(9)
    b = cf_rhs(B, 2 * f - g)
    assert np.all(b[:2] == 0)
    np.testing.assert_allclose(b, 2 * cf_rhs(B, f) - cf_rhs(B, g), atol=1e-13)


def test_rhs_of_constant_is_r2():
    B = ChebFourierBasis(0.5, 8)
    e = np.zeros(9)
    e[0] = 1.0
    b = cf_rhs(B, e)[2:]
    r = np.linspace(0.5, 1.0, 7)
    np.testing.assert_allclose(clenshaw_eval(C2, b, B.to_s(r)), r**2, atol=1e-13)


def test_expand_constant():
    B = ChebFourierBasis(0.5, 6)
    F = cf_expand(B, lambda x, y: np.ones_like(x))
    assert F[0, 0] == pytest.approx(1.0, abs=1e-15)
    F[0, 0] = 0.0
    assert np.max(np.abs(F)) <= 1e-14


def test_expand_basis_function():
    B = ChebFourierBasis(0.5, 6)
    f = lambda x, y: C.chebval(B.to_s(np.hypot(x, y)), [0, 0, 1.0]) * np.cos(3 * np.arctan2(y, x))
    F = cf_expand(B, f)
    assert F[2, column_index(3, 1)] == pytest.approx(1.0, abs=1e-13)
    F[2, column_index(3, 1)] = 0.0
    assert np.max(np.abs(F)) <= 1e-13


def test_expand_polynomial_cutoff():
    B = ChebFourierBasis(0.3, 12)
    F = cf_expand(B, lambda x, y: x**3 * y - 2 * x * x + y + 0.5)
    assert np.max(np.abs(F[5:])) <= 1e-12
    assert np.max(np.abs(F[:, column_index(5, 0):])) <= 1e-12


def test_expand_values_shape_check():
    with pytest.raises(GridMismatch):
        cf_expand_values(ChebFourierBasis(0.5, 4), np.zeros((4, 9)))


def test_sin100x_resolution():
    # N = 139 gives (N + 2)(2N + 1) = 39,339 unknowns; the solution coefficients have
    # decayed to machine precision there, while the data itself has a Fourier tail
    # of order J_139(100) ~ 7e-12
    B = ChebFourierBasis(0.5, 139)
    assert B.ndofs == 39339
    F = cf_expand(B, sin100x)
    assert np.max(np.abs(F[-10:])) <= 1e-14
    # |2 J_139(100 r)| <= 2 J_139(100) = 1.3e-11 on r <= 1
    assert 1e-13 <= np.max(np.abs(F[:, -2:])) <= 2 * 6.5756742077643934e-12
    U = solve_chebfourier(0.5, F, 139, lam=FORCED_LAMBDA_R).U
    assert np.max(np.abs(U[-5:])) <= 1e-14 and np.max(np.abs(U[:, -6:])) <= 1e-14
    F150 = cf_expand(ChebFourierBasis(0.5, 150), sin100x)
    assert np.max(np.abs(F150[:, -2:])) <= 1e-14


def _quartic_m2(rho):
    u = lambda r: (1 - r**2) * (r**2 - rho**2) * r**2
    f = lambda x, y: (x * x - y * y) * (-32 * (x * x + y * y) + 12 * (1 + rho**2))
    return u, f


def test_exact_coefficients_satisfy_system():
    rho = 0.5
    B = ChebFourierBasis(rho, 10)
    u, f = _quartic_m2(rho)
    uc = np.zeros(B.n_radial)
    uc[:7] = t_coeffs_of(u, B, 6)
    F = cf_expand(B, f)
    S = cf_assemble(B, 2, 0.0)
    res = S.todense() @ uc - cf_rhs(B, F[:, column_index(2, 1)])
    assert np.max(np.abs(res)) <= 1e-9


def test_manufactured_solve():
    rho = 0.5
    B = ChebFourierBasis(rho, 10)
    u, f = _quartic_m2(rho)
    U = solve_chebfourier(rho, f, 10).U
    x, y = np.array([0.6, -0.8, 0.1]), np.array([0.3, 0.1, -0.9])
    np.testing.assert_allclose(cf_evaluate(B, U, x, y), u(np.hypot(x, y)) * np.cos(2 * np.arctan2(y, x)),
                               atol=1e-10)


def test_radial_derivative():
    B = ChebFourierBasis(0.5, 8)
    U = np.zeros((10, 17))
    U[:, 0] = np.arange(10) * 0.1
    h = 1e-6
    x = np.array([0.7, 0.9])
    fd = (cf_evaluate(B, U, x + h, 0 * x) - cf_evaluate(B, U, x - h, 0 * x)) / (2 * h)
    np.testing.assert_allclose(cf_radial_derivative(B, U, x, 0 * x), fd, rtol=1e-7)


def test_core_with_radial_lambda_matches_constant():
    B = ChebFourierBasis(0.5, 12)
    np.testing.assert_array_equal(cf_mode_core(B, 2, 3.0).todense(), cf_mode_core(B, 2, [3.0]).todense())
