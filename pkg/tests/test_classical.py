import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial import chebyshev as C

from annular_spectral.classical import (ChebyshevT, JacobiOrthonormal, Ultraspherical2,
                                        chebyshev_T_coeffs, chebyshev_T_values, chebyshev_nodes,
                                        classical_jacobi_matrix, clenshaw_eval, conversion_T_to_C2,
                                        conversion_T_to_jacobi, eval_all, gauss_jacobi_unit,
                                        gauss_rule, jacobi_derivative, shifted_jacobi)
from annular_spectral.errors import InvalidParameter

ORTHONORMAL = [JacobiOrthonormal(0, 0), JacobiOrthonormal(1, 2), JacobiOrthonormal(0.5, -0.5),
               shifted_jacobi(1, 1), shifted_jacobi(2, 0), JacobiOrthonormal(3, 1, 0.2, 1.0)]


def test_chebyshev_recurrence_entries():
    X = classical_jacobi_matrix(ChebyshevT(), 6).todense()
    assert X[0, 1] == 0.5 and X[1, 0] == 1.0
    np.testing.assert_array_equal(np.diag(X, 1)[1:], 0.5)
    np.testing.assert_array_equal(np.diag(X, -1)[1:], 0.5)
    np.testing.assert_array_equal(np.diag(X), 0.0)


def test_shifted_legendre_matrix():
    X = classical_jacobi_matrix(shifted_jacobi(0, 0), 12).todense()
    n = np.arange(11)
    np.testing.assert_allclose(np.diag(X), 0.5, atol=1e-15)
    np.testing.assert_allclose(np.diag(X, 1), (n + 1) / (2 * np.sqrt(4 * (n + 1) ** 2 - 1)), rtol=1e-14)
    assert X[0, 1] == pytest.approx(1 / (2 * math.sqrt(3)), rel=1e-15)


@pytest.mark.parametrize("fam", ORTHONORMAL)
def test_orthonormal_symmetric_and_spectrum(fam):
    X = classical_jacobi_matrix(fam, 25).todense()
    assert np.array_equal(X, X.T)
    ev = np.linalg.eigvalsh(X)
    assert ev.min() > fam.lo and ev.max() < fam.hi


def test_invalid_parameter():
    with pytest.raises(InvalidParameter):
        JacobiOrthonormal(-1.0, 0.0)


@pytest.mark.parametrize("fam", ORTHONORMAL)
def test_orthonormality_by_gauss_rule(fam):
    g = gauss_rule(fam, 40)
    P = eval_all(fam.jacobi_matrix(31), fam.p0, 31, g.nodes)
    G = P.T @ (g.weights[:, None] * P)
    assert np.max(np.abs(G - np.eye(31))) <= 1e-11


@pytest.mark.parametrize("fam", ORTHONORMAL + [ChebyshevT(), Ultraspherical2(0.3, 1.0)])
def test_jacobi_matrix_identity(fam, rng):
    x = rng.uniform(fam.lo, fam.hi, 20)
    P = eval_all(fam.jacobi_matrix(32), fam.p0, 32, x)
    X = fam.jacobi_matrix(32).todense()
    lhs = x[:, None] * P[:, :31]
    assert np.max(np.abs(lhs - (P @ X)[:, :31])) <= 1e-11 * max(1.0, np.abs(lhs).max())


@pytest.mark.parametrize("fam", [ChebyshevT(), Ultraspherical2(), JacobiOrthonormal(1, 1)])
def test_clenshaw_e0(fam):
    x = np.linspace(-0.9, 0.9, 7)
    np.testing.assert_allclose(clenshaw_eval(fam, [1.0], x), fam.p0)


def test_clenshaw_chebyshev_trig():
    th = np.linspace(0, np.pi, 9)
    np.testing.assert_allclose(clenshaw_eval(ChebyshevT(), [0, 0, 0, 1.0], np.cos(th)), np.cos(3 * th),
                               atol=1e-14)


@given(seed=st.integers(0, 2**16), which=st.integers(0, len(ORTHONORMAL) + 1))
@settings(max_examples=40, deadline=None)
def test_clenshaw_matches_recurrence(seed, which):
    fams = ORTHONORMAL + [ChebyshevT(), Ultraspherical2()]
    fam = fams[which]
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(11)
    x = rng.uniform(fam.lo, fam.hi, 5)
    direct = eval_all(fam.jacobi_matrix(11), fam.p0, 11, x) @ c
    np.testing.assert_allclose(clenshaw_eval(fam, c, x), direct, rtol=1e-13, atol=1e-13)


def test_gauss_midpoint():
    g = gauss_rule(shifted_jacobi(0, 0), 1)
    np.testing.assert_allclose(g.nodes, [0.5])
    np.testing.assert_allclose(g.weights, [1.0])


def test_gauss_second_moment():
    g = gauss_rule(shifted_jacobi(0, 0), 2)
    assert g.integrate(lambda x: x**2) == pytest.approx(1 / 3, abs=1e-14)


def test_gauss_chebyshev_mass():
    assert gauss_rule(ChebyshevT(), 5).weights.sum() == pytest.approx(math.pi, rel=1e-14)


@pytest.mark.parametrize("a,b", [(0, 0), (1, 1), (2, 0.5), (0, 3)])
@pytest.mark.parametrize("n", [1, 3, 8])
def test_gauss_exact_on_monomials(a, b, n):
    from scipy.special import beta
    g = gauss_jacobi_unit(a, b, n)
    assert np.all(g.weights > 0)
    for k in range(2 * n):
        exact = beta(a + k + 1, b + 1)
        assert g.integrate(lambda x: x**k) == pytest.approx(exact, rel=1e-12)


def test_conversion_T_to_C2_sampled(rng):
    N = 14
    R = conversion_T_to_C2(N)
    assert R.upper_bw <= 4 and R.lower_bw == 0
    c = rng.standard_normal(N - 4)
    c = np.concatenate([c, np.zeros(4)])
    x = np.concatenate([[0.0, 0.5], rng.uniform(-1, 1, 10)])
    np.testing.assert_allclose(clenshaw_eval(Ultraspherical2(), R.todense() @ c, x), C.chebval(x, c),
                               atol=1e-11)


def test_conversion_T_to_C2_column0():
    e = np.zeros(6)
    e[0] = 1.0
    col = conversion_T_to_C2(6).todense() @ e
    np.testing.assert_allclose(clenshaw_eval(Ultraspherical2(), col, np.array([0.0, 0.5])), [1.0, 1.0])


@pytest.mark.parametrize("a,b", [(0, 0), (1, 1), (2, 1)])
def test_conversion_T_to_jacobi_sampled(a, b, rng):
    N = 8
    R, s = conversion_T_to_jacobi(a, b, N)
    x = rng.uniform(0, 1, 20)
    fam = shifted_jacobi(a, b)
    P = eval_all(fam.jacobi_matrix(N), fam.p0, N, x)
    T = C.chebvander(1 - 2 * x, N - 1)
    np.testing.assert_allclose(T @ R.todense() @ np.diag(s), P, atol=1e-11)
    assert np.all(np.tril(R.todense(), -1) == 0)


def test_conversion_T_to_jacobi_constant():
    R, s = conversion_T_to_jacobi(0, 0, 4)
    Rd = R.todense()
    assert np.all(Rd[1:, 0] == 0) and Rd[0, 0] > 0


def test_conversion_T_to_jacobi_parity():
    # symmetric weights give even/odd polynomials, so every other entry vanishes
    Rd = conversion_T_to_jacobi(1, 1, 10)[0].todense()
    i, j = np.indices(Rd.shape)
    assert np.max(np.abs(Rd[(i + j) % 2 == 1])) <= 1e-13 * np.abs(Rd).max()


def test_conversion_T_to_jacobi_integer_only():
    with pytest.raises(InvalidParameter):
        conversion_T_to_jacobi(0.5, 0, 4)


def test_chebyshev_transform_roundtrip(rng):
    c = rng.standard_normal(9)
    v = chebyshev_T_values(c, 12)
    np.testing.assert_allclose(v, C.chebval(chebyshev_nodes(12), c), atol=1e-13)
    np.testing.assert_allclose(chebyshev_T_coeffs(v)[:9], c, atol=1e-13)


@pytest.mark.parametrize("a,b", [(0, 0), (1, 2)])
def test_jacobi_derivative_fd(a, b, rng):
    N = 10
    fam, up = shifted_jacobi(a, b), shifted_jacobi(a + 1, b + 1)
    D = jacobi_derivative(a, b, N).todense()
    x = rng.uniform(0.1, 0.9, 8)
    h = 1e-5
    P = lambda z: eval_all(fam.jacobi_matrix(N), fam.p0, N, z)
    fd = (P(x + h) - P(x - h)) / (2 * h)
    Pu = eval_all(up.jacobi_matrix(N), up.p0, N, x)
    assert np.max(np.abs(fd - Pu @ D)) / np.abs(fd).max() <= 1e-7
