"""Right-hand sides and closed-form solutions for the benchmark problems."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def _r2(x, y):
    return np.asarray(x, dtype=float) ** 2 + np.asarray(y, dtype=float) ** 2


# ---------------------------------------------------------------------
# quartic manufactured solution
# ---------------------------------------------------------------------
def quartic_solution(rho):
    """u = (1 - r^2)(r^2 - rho^2), vanishing on both circles."""
    return lambda x, y: (1.0 - _r2(x, y)) * (_r2(x, y) - rho * rho)


def quartic_rhs(rho):
    """Delta of :func:`quartic_solution`: 4(1 + rho^2) - 16 r^2."""
    return lambda x, y: 4.0 * (1.0 + rho * rho) - 16.0 * _r2(x, y)


# ---------------------------------------------------------------------
# single Gaussian bump
# ---------------------------------------------------------------------
def gaussian(a, b, c):
    return lambda x, y: np.exp(-a * ((np.asarray(x) - b) ** 2 + (np.asarray(y) - c) ** 2))


def gaussian_bump_rhs(a, b, c):
    """Delta exp(-a((x-b)^2 + (y-c)^2))."""
    def f(x, y):
        d2 = (np.asarray(x) - b) ** 2 + (np.asarray(y) - c) ** 2
        return -4.0 * a * np.exp(-a * d2) * (1.0 - a * d2)
    return f


# ---------------------------------------------------------------------
# forced Helmholtz with lam = 80^2 r^2
# ---------------------------------------------------------------------
def sin100x(x, y):
    return np.sin(100.0 * np.asarray(x, dtype=float)) * np.ones(np.broadcast(x, y).shape)


FORCED_LAMBDA_R = (0.0, 0.0, 6400.0)    # monomials in r
FORCED_LAMBDA_R2 = (0.0, 6400.0)        # monomials in r^2


# ---------------------------------------------------------------------
# five Gaussians times a piecewise radial factor
# ---------------------------------------------------------------------
@dataclass(frozen=True)
class FiveGaussianProblem:
    """u = G(x, y) h(r) with G a sum of Gaussians and h the C^1 radial factor with
    Delta h = kappa(r) piecewise constant, h(1) = 0.  Gaussian rates are taken
    positive (decaying)."""
    rho: float = 0.5
    kappa0: float = 100.0
    kappa1: float = 1.0
    weights: tuple = (1.0, 1.0, 1.0, 1.0, 1.0)
    rates: tuple = (10.0, 20.0, 30.0, 40.0, 50.0)
    centers: tuple = field(default=None)

    def __post_init__(self):
        if self.centers is None:
            th = (0.0, math.pi / 2, math.pi / 3, 5 * math.pi / 4)
            pts = tuple((self.rho * math.cos(t), self.rho * math.sin(t)) for t in th)
            pts += ((0.9 * math.cos(3 * math.pi / 4), 0.9 * math.sin(3 * math.pi / 4)),)
            object.__setattr__(self, "centers", pts)

    def kappa(self, r):
        return np.where(np.asarray(r) <= self.rho, self.kappa0, self.kappa1)

    def _h(self, r, cell):
        k0, k1, p = self.kappa0, self.kappa1, self.rho
        if cell == 0:
            return (k0 * r * r / 4 + (k1 - k0) * p * p / 4 - k1 / 4
                    + (k0 - k1) * p * p * math.log(p) / 2)
        with np.errstate(divide="ignore"):
            return k1 * r * r / 4 - k1 / 4 + (k0 - k1) * p * p * np.log(r) / 2

    def _dh_over_r(self, r, cell):
        k0, k1, p = self.kappa0, self.kappa1, self.rho
        if cell == 0:
            return k0 / 2 + 0.0 * r
        return k1 / 2 + (k0 - k1) * p * p / (2 * r * r)

    def _gauss_terms(self, x, y):
        """G, x G_x + y G_y, Delta G."""
        G = np.zeros(np.broadcast(x, y).shape)
        radial = np.zeros_like(G)
        lap = np.zeros_like(G)
        for d, a, (b, c) in zip(self.weights, self.rates, self.centers):
            d2 = (x - b) ** 2 + (y - c) ** 2
            g = d * np.exp(-a * d2)
            G += g
            radial += -2 * a * (x * (x - b) + y * (y - c)) * g
            lap += 4 * a * (a * d2 - 1) * g
        return G, radial, lap

    def cell_of(self, r):
        return np.where(np.asarray(r) <= self.rho, 0, 1)

    def solution_cell(self, cell):
        def u(x, y):
            x = np.asarray(x, dtype=float)
            y = np.asarray(y, dtype=float)
            G = self._gauss_terms(x, y)[0]
            return G * self._h(np.hypot(x, y), cell)
        return u

    def rhs_cell(self, cell, helmholtz=False):
        """Delta u (Poisson) or Delta u + kappa u (Helmholtz) using the cell's branch."""
        kap = self.kappa0 if cell == 0 else self.kappa1

        def f(x, y):
            x = np.asarray(x, dtype=float)
            y = np.asarray(y, dtype=float)
            r = np.hypot(x, y)
            G, radial, lap = self._gauss_terms(x, y)
            h = self._h(r, cell)
            out = h * lap + 2 * self._dh_over_r(r, cell) * radial + kap * G
            if helmholtz:
                out = out + kap * G * h
            return out
        return f

    def _piecewise(self, parts):
        def g(x, y):
            x = np.asarray(x, dtype=float)
            y = np.asarray(y, dtype=float)
            inner = np.hypot(x, y) <= self.rho
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.where(inner, parts[0](x, y), parts[1](x, y))
        return g

    def solution(self):
        return self._piecewise([self.solution_cell(0), self.solution_cell(1)])

    def rhs(self, helmholtz=False):
        return self._piecewise([self.rhs_cell(0, helmholtz), self.rhs_cell(1, helmholtz)])
