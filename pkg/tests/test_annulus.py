import math
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from annular_spectral.annulus import (AnnulusGrid, AnnulusParams, DiskMode, ModeCoefficients,
                                      analysis, column_index, disk_analysis, disk_polar_values,
                                      disk_weighted_laplacian, disk_weighted_lowering, eval_Z,
                                      eval_weighted_W, evaluate, laplacian_W, laplacian_Z,
                                      lowering_weighted, mode_columns, mode_size, mode_values,
                                      mult_r2, mult_xy, polar_values, radial_derivatives,
                                      radial_values, synthesis, zernike_disk_basis)
from annular_spectral.errors import GridMismatch, InvalidMode, InvalidParameter
from annular_spectral.semiclassical import SemiclassicalFamily, general_raise_connection

from conftest import annulus_points, fd_laplacian, tensor_rule


# -- parameters and evaluation --------------------------------------------
def test_t_from_rho():
    assert AnnulusParams(0.5).t == pytest.approx(1 / 0.75, rel=1e-15)
    with pytest.raises(InvalidParameter):
        AnnulusParams(1.0)


def test_constant_member():
    # Q_0 of the x^0 (1-x)^0 family is 1; the value is the unit constant
    p = AnnulusParams(0.5, 0, 0)
    np.testing.assert_allclose(eval_Z(p, 0, (0, 1), np.array([0.7, 0.1]), np.array([0.1, -0.6])), 1.0)


def test_m1_factor_is_x(rng):
    p = AnnulusParams(0.4, 1, 1)
    x, y = annulus_points(rng, 0.4, 5)
    np.testing.assert_allclose(eval_Z(p, 1, (1, 1), x, y), x * SemiclassicalFamily(p.t, 1, 1, 1).norm0,
                               rtol=1e-14)


def test_invalid_modes():
    p = AnnulusParams(0.5)
    for n, m, j in [(3, 2, 1), (1, 2, 1), (0, 0, 0), (2, 2, 3)]:
        with pytest.raises(InvalidMode):
            eval_Z(p, n, (m, j), 0.7, 0.0)


def test_gram_schmidt_oracle():
    rho = 0.5
    p = AnnulusParams(rho, 1, 1)
    X, Y, W = tensor_rule(rho, 30, 21)
    w = W * p.weight(X, Y)
    ip = lambda f, g: np.dot(w, f * g)
    b0 = X**2 - Y**2
    b1 = b0 * (X**2 + Y**2)
    proj = ip(b1, b0) / ip(b0, b0)
    q1 = b1 - proj * b0
    # q1 has a positive r^2 coefficient, hence a negative tau coefficient: flip the sign
    scale = -math.sqrt(p.mode_norm2(2) / ip(q1, q1))
    x0, y0 = 0.6, 0.3
    oracle = scale * (x0**2 - y0**2) * (x0**2 + y0**2 - proj)
    assert eval_Z(p, 4, (2, 1), x0, y0) == pytest.approx(oracle, rel=1e-10)


def test_weighted_vanishes_on_boundary():
    p = AnnulusParams(0.3, 1, 1)
    th = np.linspace(0, 2 * np.pi, 7)
    for r in (1.0, 0.3):
        np.testing.assert_allclose(eval_weighted_W(p, 5, (3, 0), r * np.cos(th), r * np.sin(th)), 0.0,
                                   atol=1e-15)


def test_weighted_is_weight_times_Z(rng):
    p = AnnulusParams(0.3, 1, 2)
    x, y = annulus_points(rng, 0.3, 5)
    np.testing.assert_allclose(eval_weighted_W(p, 4, (2, 0), x, y), p.weight(x, y) * eval_Z(p, 4, (2, 0), x, y))


@pytest.mark.parametrize("rho,a,b", [(0.5, 0, 0), (0.5, 1, 1), (0.2, 1, 1)])
def test_orthogonality_2d(rho, a, b):
    N = 12
    p = AnnulusParams(rho, a, b)
    X, Y, W = tensor_rule(rho, 30, 4 * N + 3)
    w = W * p.weight(X, Y)
    order = ModeCoefficients.ordering(N)
    A = np.array([eval_Z(p, n, (m, j), X, Y) for n, m, j in order])
    norms = np.array([p.mode_norm2(m) for n, m, j in order])
    G = (A * w) @ A.T / np.sqrt(np.outer(norms, norms))
    assert np.max(np.abs(G - np.eye(len(order)))) <= 1e-9


# -- operator matrices ----------------------------------------------------
def test_lowering_sampled_and_banded(rng):
    p = AnnulusParams(0.5, 1, 1)
    m, k = 3, 8
    L = lowering_weighted(p, m, k)
    assert (L.lower_bw, L.upper_bw) == (2, 2)
    x, y = annulus_points(rng, 0.5, 10)
    lhs = mode_values(p, m, 1, k, x, y, weighted=True)
    rhs = mode_values(p, m, 1, k, x, y) @ L.todense()
    assert np.max(np.abs(lhs - rhs)[:, : k - 2]) <= 1e-9


def test_lowering_factor_product():
    p = AnnulusParams(0.5, 1, 1)
    m, k = 2, 10
    R = general_raise_connection(SemiclassicalFamily(p.t, 0, 0, m), 1, 1, 0, k + 2).todense()
    np.testing.assert_allclose(lowering_weighted(p, m, k).todense(), (R @ R.T)[:k, :k] / p.t**2,
                               atol=1e-15)


@pytest.mark.parametrize("rho,a,b,m", [(0.5, 0, 0, 0), (0.5, 0, 0, 2), (0.5, 1, 1, 3), (0.8, 0, 0, 1)])
def test_laplacian_Z_fd(rho, a, b, m, rng):
    p = AnnulusParams(rho, a, b)
    k = 6
    D = laplacian_Z(p, m, k)
    assert D.lower_bw == 0 and D.upper_bw == 3
    Dd = D.todense()
    if m == 0:
        assert np.all(Dd[:, 0] == 0)
    x, y = annulus_points(rng, rho * 1.05, 10)
    lhs = np.array([fd_laplacian(lambda X, Y: mode_values(p, m, 1, k, X, Y)[:, i], x, y)
                    for i in range(k)]).T
    rhs = mode_values(AnnulusParams(rho, a + 2, b + 2), m, 1, k, x, y) @ Dd
    assert np.max(np.abs(lhs - rhs)) / np.abs(rhs).max() <= 1e-5


@pytest.mark.parametrize("rho,m,j", [(0.8, 5, 0), (0.5, 0, 1), (0.3, 2, 1)])
def test_laplacian_W_fd(rho, m, j, rng):
    # degrees m, m+2, m+4 (n = 9 for m = 5)
    p = AnnulusParams(rho, 1, 1)
    k = 4
    D = laplacian_W(p, m, k)
    assert (D.lower_bw, D.upper_bw) == (1, 1)
    x, y = annulus_points(rng, rho * 1.05, 10)
    lhs = np.array([fd_laplacian(lambda X, Y: mode_values(p, m, j, k, X, Y, weighted=True)[:, i], x, y)
                    for i in range(k - 1)]).T
    rhs = (mode_values(p, m, j, k, x, y) @ D.todense())[:, : k - 1]
    assert np.max(np.abs(lhs - rhs)) / np.abs(lhs).max() <= 1e-5


def test_laplacian_W_linear():
    p = AnnulusParams(0.5, 1, 1)
    D = laplacian_W(p, 2, 6).todense()
    c = np.arange(1.0, 7.0)
    np.testing.assert_allclose(D @ (2 * c), 2 * (D @ c))


def test_mult_r2(rng):
    p = AnnulusParams(0.5, 1, 1)
    k = 7
    M = mult_r2(p, 1, k)
    Md = M.todense()
    assert np.array_equal(Md, Md.T) and M.upper_bw == 1
    ev = np.linalg.eigvalsh(Md)
    assert ev.min() >= 0.25 and ev.max() <= 1
    assert Md[0, 0] == 1 - p.family(1).jacobi_matrix(2).todense()[0, 0] / p.t
    x, y = np.array([0.7]), np.array([0.1])
    V = mode_values(p, 1, 1, k, x, y)
    assert np.max(np.abs((x**2 + y**2)[:, None] * V - V @ Md)[:, : k - 1]) <= 1e-10


@pytest.mark.parametrize("m", [0, 1, 2, 4])
@pytest.mark.parametrize("axis", ["x", "y"])
def test_mult_xy(m, axis, rng):
    p = AnnulusParams(0.5, 1, 1)
    x, y = annulus_points(rng, 0.5, 10)
    k = 6
    for j in ((1,) if m == 0 else (0, 1)):
        lhs = (x if axis == "x" else y)[:, None] * mode_values(p, m, j, k, x, y)
        rhs = 0.0
        for (mm, jj), B in mult_xy(p, m, axis, j, k):
            rhs = rhs + mode_values(p, mm, jj, B.rows, x, y) @ B.todense()
        assert np.max(np.abs(lhs - rhs)[:, : k - 1]) <= 1e-9


def test_mult_xy_block_pattern():
    p = AnnulusParams(0.5, 1, 1)
    assert [mj for mj, _ in mult_xy(p, 0, "x", 1, 4)] == [(1, 1)]
    sign = lambda B: np.sign(B.todense()[np.nonzero(B.todense())][0])
    y1 = mult_xy(p, 3, "y", 1, 4)
    assert [mj for mj, _ in y1] == [(2, 0), (4, 0)] and [sign(B) for _, B in y1] == [-1, 1]
    y0 = mult_xy(p, 3, "y", 0, 4)
    assert [mj for mj, _ in y0] == [(2, 1), (4, 1)] and [sign(B) for _, B in y0] == [1, -1]


# -- layout and transforms --------------------------------------------------
@given(N=st.integers(0, 20), seed=st.integers(0, 2**16))
def test_interlace_roundtrip(N, seed):
    v = np.random.default_rng(seed).standard_normal((N + 1) * (N + 2) // 2)
    c = ModeCoefficients.from_vector(N, v)
    assert np.array_equal(c.to_vector(), v)


def test_layout_columns():
    c = ModeCoefficients.from_vector(4, np.arange(15.0))
    # column (m, j) holds degrees m, m+2, ...; ordering is (0,0,1), (1,1,0), (1,1,1), (2,0,1), ...
    np.testing.assert_array_equal(c.mode(0, 1), [0.0, 3.0, 10.0])
    np.testing.assert_array_equal(c.mode(1, 0), [1.0, 6.0])
    np.testing.assert_array_equal(c.mode(4, 1), [14.0])
    assert c.matrix.shape == (3, 9) and c.matrix[1, column_index(4, 1)] == 0
    assert mode_size(4, 3) == 1 and mode_size(4, 5) == 0


@pytest.mark.parametrize("rho,N", [(0.5, 8), (0.2, 13)])
def test_grid(rho, N):
    g = AnnulusGrid(rho, N)
    assert g.K == (N + 1) // 2 + 1 and g.L == 4 * g.K - 3
    assert np.all(np.diff(g.r) < 0) and g.r.min() > rho and g.r.max() < 1
    np.testing.assert_allclose(np.diff(g.theta), 2 * np.pi / g.L)


def test_synthesis_constant():
    p = AnnulusParams(0.5, 1, 1)
    c = ModeCoefficients(6)
    c.set_mode(0, 1, [1.0])
    np.testing.assert_allclose(synthesis(p, c), p.family(0).norm0, rtol=1e-13)


@pytest.mark.parametrize("rho,N,weighted", [(0.5, 8, False), (0.2, 16, True), (0.5, 32, False)])
def test_synthesis_analysis(rho, N, weighted, rng):
    p = AnnulusParams(rho, 1, 1)
    c = ModeCoefficients.from_vector(N, rng.standard_normal((N + 1) * (N + 2) // 2))
    g = AnnulusGrid(rho, N)
    F = synthesis(p, c, g, weighted=weighted)
    X, Y = g.points()
    brute = evaluate(p, c, X, Y, weighted=weighted)
    assert np.max(np.abs(F - brute)) <= 1e-10 * max(1, np.abs(brute).max())
    back = analysis(p, F, N, weighted=weighted)
    assert np.max(np.abs(back.matrix - c.matrix)) <= 1e-10


def test_analysis_of_x_and_constant():
    p = AnnulusParams(0.5, 0, 0)
    N = 6
    X, Y = AnnulusGrid(0.5, N).points()
    cx = analysis(p, X, N)
    nz = np.argwhere(np.abs(cx.matrix) > 1e-12)
    assert nz.tolist() == [[0, column_index(1, 1)]]
    c1 = analysis(p, np.ones_like(X), N)
    assert np.argwhere(np.abs(c1.matrix) > 1e-12).tolist() == [[0, 0]]


def test_analysis_degree_cutoff():
    p = AnnulusParams(0.3, 1, 1)
    N = 12
    X, Y = AnnulusGrid(0.3, N).points()
    c = analysis(p, X**3 * Y - 2 * X * X + Y, N)
    v = c.to_vector()
    order = ModeCoefficients.ordering(N)
    assert max(abs(val) for val, (n, m, j) in zip(v, order) if n > 4) <= 1e-12


def test_analysis_grid_mismatch():
    with pytest.raises(GridMismatch):
        analysis(AnnulusParams(0.5), np.zeros((3, 3)), 8)


def test_synthesis_cost_scaling(rng):
    p = AnnulusParams(0.5, 1, 1)
    times = []
    for N in (64, 128):
        c = ModeCoefficients.from_vector(N, rng.standard_normal((N + 1) * (N + 2) // 2))
        synthesis(p, c)
        t0 = time.perf_counter()
        synthesis(p, c)
        times.append(time.perf_counter() - t0)
    assert times[1] / times[0] <= 8.0 * 1.5


def test_polar_values_match_evaluate(rng):
    p = AnnulusParams(0.4, 1, 1)
    N = 9
    c = ModeCoefficients.from_vector(N, rng.standard_normal((N + 1) * (N + 2) // 2))
    r = np.array([0.45, 0.7, 0.95])
    th = np.array([0.1, 2.0, 4.0])
    X, Y = r[:, None] * np.cos(th), r[:, None] * np.sin(th)
    np.testing.assert_allclose(polar_values(p, c, r, th, True), evaluate(p, c, X, Y, True), atol=1e-13)


def test_radial_derivatives_fd():
    p = AnnulusParams(0.5, 0, 0)
    h = 1e-6
    fd = (radial_values(p, 3, 4, 0.7 + h) - radial_values(p, 3, 4, 0.7 - h)) / (2 * h)
    np.testing.assert_allclose(radial_derivatives(p, 3, 4, 0.7), fd, rtol=1e-7, atol=1e-7)


# -- disk --------------------------------------------------------------------
@pytest.mark.parametrize("b", [0, 1, 2])
def test_disk_orthogonal(b):
    # ||Z_{n,m,j}||^2 = (2 pi if m = 0 else pi) 2^{-(m+b+2)} with orthonormal P^{(b,m)} on [-1, 1]
    N = 10
    s, w = np.polynomial.legendre.leggauss(40)
    r = (s + 1) / 2
    w = w / 2 * r * (1 - r * r) ** b
    L = 2 * N + 3
    th = 2 * np.pi * np.arange(L) / L
    R, T = np.meshgrid(r, th, indexing="ij")
    W = (w[:, None] * np.full(L, 2 * np.pi / L)).ravel()
    X, Y = (R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()
    blocks, norms = [], []
    for m in range(4):
        for j in ((1,) if m == 0 else (0, 1)):
            k = mode_size(N, m)
            blocks.append(DiskMode(b, m).values(j, k, X, Y))
            norms += [(2 * np.pi if m == 0 else np.pi) * 2.0 ** -(m + b + 2)] * k
    V = np.hstack(blocks)
    G = (V.T * W) @ V / np.sqrt(np.outer(norms, norms))
    assert np.max(np.abs(G - np.eye(G.shape[0]))) <= 1e-12


def test_disk_constant_value():
    # P_0 orthonormal on [-1, 1] for (1-y)^b: 1/sqrt(2^{b+1}/(b+1))
    assert DiskMode(1, 0).values(1, 1, 0.2, 0.1)[0, 0] == pytest.approx(1 / math.sqrt(2.0), rel=1e-14)


def test_disk_laplacian(rng):
    dm = zernike_disk_basis(0, 3)
    k = 6
    D = dm.laplacian(k)
    assert (D.lower_bw, D.upper_bw) == (0, 1)
    x, y = annulus_points(rng, 0.05, 10)
    x, y = 0.9 * x, 0.9 * y
    lhs = np.array([fd_laplacian(lambda X, Y: dm.values(1, k, X, Y)[:, i], x, y) for i in range(k)]).T
    rhs = zernike_disk_basis(2, 3).values(1, k, x, y) @ D.todense()
    assert np.max(np.abs(lhs - rhs)) / np.abs(rhs).max() <= 1e-5
    # at a single point
    v = lambda X, Y: dm.values(1, k, X, Y)
    assert np.max(np.abs(fd_laplacian(v, 0.3, 0.2) - zernike_disk_basis(2, 3).values(1, k, 0.3, 0.2) @ D.todense())) <= 1e-5


def test_disk_raise(rng):
    dm = zernike_disk_basis(0, 3)
    x, y = annulus_points(rng, 0.05, 10)
    R = dm.raise2(6).todense()
    err = dm.values(0, 6, x, y) - zernike_disk_basis(2, 3).values(0, 6, x, y) @ R
    assert np.max(np.abs(err)[:, :4]) <= 1e-12


def test_disk_weighted_laplacian():
    np.testing.assert_allclose(np.diag(disk_weighted_laplacian(0, 3).todense()), [-4, -16, -36], rtol=1e-13)
    for m in (0, 1, 4):
        D = disk_weighted_laplacian(m, 6)
        assert D.effective_bandwidths(1e-12) == (0, 0)
    m, k, h = 2, 5, 1e-4
    x0, y0 = 0.3, 0.4
    W = lambda x, y: (1 - x * x - y * y) * DiskMode(1, m).values(1, k, x, y)
    lap = fd_laplacian(W, x0, y0, h)
    np.testing.assert_allclose(lap, DiskMode(1, m).values(1, k, x0, y0) @ disk_weighted_laplacian(m, k).todense(),
                               rtol=1e-5, atol=1e-5)


def test_disk_weighted_lowering():
    m, k = 2, 6
    x0, y0 = np.array([0.3, -0.5]), np.array([0.4, 0.1])
    W = (1 - x0**2 - y0**2)[:, None] * DiskMode(1, m).values(1, k, x0, y0)
    L = disk_weighted_lowering(m, k + 1).todense()
    np.testing.assert_allclose(W, (DiskMode(1, m).values(1, k + 1, x0, y0) @ L)[:, :k], atol=1e-14)


@pytest.mark.parametrize("b,radius", [(2, 1.0), (0, 0.5)])
def test_disk_analysis_roundtrip(b, radius):
    f = lambda x, y: x**3 * y - 2 * x * x + y + 0.5
    C = disk_analysis(lambda x, y: f(x / radius, y / radius), 10, b, radius=radius)
    r = np.array([0.1, 0.5, 0.9]) * radius
    th = np.array([0.3, 2.0])
    V = disk_polar_values(b, C, r, th, radius=radius)
    X, Y = r[:, None] * np.cos(th) / radius, r[:, None] * np.sin(th) / radius
    np.testing.assert_allclose(V, f(X, Y), atol=1e-13)
