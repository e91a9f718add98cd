import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def annulus_points(rng, rho, n):
    """n random points in the annulus rho < r < 1 (uniform in r^2)."""
    r = np.sqrt(rng.uniform(rho * rho, 1.0, n))
    th = rng.uniform(0.0, 2 * np.pi, n)
    return r * np.cos(th), r * np.sin(th)


def fd_laplacian(f, x, y, h=1e-4):
    return (f(x + h, y) + f(x - h, y) + f(x, y + h) + f(x, y - h) - 4 * f(x, y)) / h**2


def max_rel(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(b)))


def tensor_rule(rho, nr, L):
    """Quadrature on the annulus: Gauss-Legendre in r^2, trapezoid in theta."""
    s, w = np.polynomial.legendre.leggauss(nr)
    u = rho**2 + (1 - rho**2) * (s + 1) / 2
    w = w * (1 - rho**2) / 2 / 2            # r dr = du / 2
    r = np.sqrt(u)
    th = 2 * np.pi * np.arange(L) / L
    X = (r[:, None] * np.cos(th)).ravel()
    Y = (r[:, None] * np.sin(th)).ravel()
    W = (w[:, None] * np.full(L, 2 * np.pi / L)).ravel()
    return X, Y, W
