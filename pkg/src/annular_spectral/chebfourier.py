"""Scaled-and-shifted Chebyshev-Fourier series on the annulus rho <= r <= 1.

Radial functions are expanded in T_n(s) with s = (2/(1-rho)) (r - (1+rho)/2);
the multiplied-through mode equation

    (r^2 d_rr + r d_r - m^2 + lam r^2) u_m = r^2 f_m

is discretised by ultraspherical operators mapping T coefficients to C^(2)
coefficients.  Coefficient matrices use the same column layout as
:class:`annular_spectral.annulus.ModeCoefficients` (column (m, j)), with one
row per radial degree.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .annulus import column_index, mode_columns
from .banded import BandedMatrix, BorderedSystem
from .classical import (Ultraspherical2, chebyshev_T_coeffs, chebyshev_nodes,
                        clenshaw_eval, ChebyshevT, conversion_T_to_C2,
                        conversion_U_to_C2)
from .errors import GridMismatch, InvalidMode, InvalidParameter


@dataclass(frozen=True)
class ChebFourierBasis:
    rho: float
    N: int

    def __post_init__(self):
        if not 0.0 <= self.rho < 1.0:
            raise InvalidParameter(f"inner radius must lie in [0, 1), got {self.rho}")
        if self.N < 0:
            raise InvalidParameter(f"truncation degree must be nonnegative, got {self.N}")

    @property
    def scale(self):
        """ds/dr."""
        return 2.0 / (1.0 - self.rho)

    @property
    def center(self):
        return 0.5 * (1.0 + self.rho)

    def to_s(self, r):
        # written so that r = rho and r = 1 map to -1 and 1 exactly
        r = np.asarray(r, dtype=float)
        return ((r - self.rho) - (1.0 - r)) / (1.0 - self.rho)

    def to_r(self, s):
        s = np.asarray(s, dtype=float)
        return 0.5 * ((1.0 - s) * self.rho + (1.0 + s))

    @property
    def n_radial(self):
        """Radial coefficients per mode in the solution (N + 2)."""
        return self.N + 2

    @property
    def ndofs(self):
        return (self.N + 2) * (2 * self.N + 1)

    def radial_nodes(self):
        """r at the N + 1 first-kind Chebyshev nodes (decreasing)."""
        return self.to_r(chebyshev_nodes(self.N + 1))

    def angles(self):
        L = 2 * self.N + 1
        return 2 * np.pi * np.arange(L) / L


def cf_operators(basis: ChebFourierBasis, n=None):
    """n x n matrices (D, R, X), n defaulting to N + 2:

    (r^2 d_rr + r d_r) T(s) = C2(s) D,  T(s) = C2(s) R,  r C2(s) = C2(s) X.
    """
    n = basis.N + 2 if n is None else n
    big = n + 2
    a = basis.scale
    k = np.arange(big, dtype=float)
    D2 = BandedMatrix.from_diagonals({2: 2.0 * k[2:] * a * a}, big, big)   # T'' in C2
    D1 = BandedMatrix.from_diagonals({1: k[1:] * a}, big, big)             # T' in U
    X = Ultraspherical2(basis.rho, 1.0).jacobi_matrix(big)
    R = conversion_T_to_C2(big)
    D = X @ (X @ D2) + X @ (conversion_U_to_C2(big) @ D1)
    return (D.truncate(n).with_bandwidths(0, 4),
            R.truncate(n).with_bandwidths(0, 4),
            X.truncate(n))


def _radial_poly(lam):
    """Monomial coefficients of a radial coefficient lam(r)."""
    c = np.atleast_1d(np.asarray(lam, dtype=float))
    if c.ndim != 1:
        raise InvalidParameter("radial coefficient must be a scalar or 1-D monomial coefficients")
    return c


def _power_times_R(X, R, p):
    out = R
    for _ in range(p):
        out = X @ out
    return out


def cf_mode_core(basis: ChebFourierBasis, m, lam=0.0):
    """N x (N+2) banded core D - m^2 R + sum_k lam_k X^{k+2} R, where lam(r) =
    sum_k lam_k r^k (a scalar lam gives the constant-coefficient operator)."""
    if m < 0:
        raise InvalidMode(f"m must be nonnegative, got {m}")
    c = _radial_poly(lam)
    n = basis.N + 2
    big = n + len(c) + 2
    D, R, X = cf_operators(basis, big)
    A = D - R * float(m * m)
    for k, ck in enumerate(c):
        if ck != 0.0:
            A = A + _power_times_R(X, R, k + 2) * float(ck)
    return A.truncate(basis.N, n).compress()


def boundary_rows(n):
    """Rows T_k(-1) and T_k(1), k < n."""
    k = np.arange(n)
    return np.vstack([(-1.0) ** k, np.ones(n)])


def cf_assemble(basis: ChebFourierBasis, m, lam=0.0) -> BorderedSystem:
    """(N+2) x (N+2) bordered system: Dirichlet rows at r = rho and r = 1, then the
    truncated mode operator."""
    core = cf_mode_core(basis, m, lam)
    return BorderedSystem(core, boundary_rows(basis.N + 2))


def cf_rhs(basis: ChebFourierBasis, f):
    """(0, 0, X^2 R f) for T coefficients f of one mode."""
    n = basis.N + 2
    f = np.asarray(f, dtype=float)
    if f.shape[0] > n:
        if np.any(f[n:]):
            raise GridMismatch(f"mode data has {f.shape[0]} coefficients, system holds {n}")
        f = f[:n]
    g = np.zeros(n + 2)
    g[: f.shape[0]] = f
    D, R, X = cf_operators(basis, n + 2)
    h = X @ (X @ (R @ g))
    return np.concatenate([[0.0, 0.0], h[: basis.N]])


def cf_expand(basis: ChebFourierBasis, f):
    """(N+1) x (2N+1) T-Fourier coefficients of f(x, y) from samples on
    N + 1 radial Chebyshev nodes and 2N + 1 equispaced angles."""
    r = basis.radial_nodes()
    th = basis.angles()
    x = r[:, None] * np.cos(th)[None, :]
    y = r[:, None] * np.sin(th)[None, :]
    vals = np.asarray(f(x, y), dtype=float) * np.ones_like(x)
    return cf_expand_values(basis, vals)


def cf_expand_values(basis: ChebFourierBasis, vals):
    N = basis.N
    vals = np.asarray(vals, dtype=float)
    if vals.shape != (N + 1, 2 * N + 1):
        raise GridMismatch(f"values have shape {vals.shape}, expected {(N + 1, 2 * N + 1)}")
    F = np.fft.rfft(vals, axis=1) / (2 * N + 1)
    radial = np.zeros((N + 1, 2 * N + 1))
    for m, j in mode_columns(N):
        if j == 1:
            radial[:, column_index(m, j)] = F[:, m].real * (1.0 if m == 0 else 2.0)
        else:
            radial[:, column_index(m, j)] = -2.0 * F[:, m].imag
    return chebyshev_T_coeffs(radial)


def cf_evaluate(basis: ChebFourierBasis, U, x, y):
    """Evaluate a T-Fourier coefficient matrix (any number of radial rows)."""
    U = np.asarray(U, dtype=float)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = np.hypot(x, y)
    s = basis.to_s(r)
    th = np.arctan2(y, x)
    out = np.zeros(np.broadcast(x, y).shape)
    T = ChebyshevT()
    for m, j in mode_columns((U.shape[1] - 1) // 2):
        c = U[:, column_index(m, j)]
        if np.any(c):
            trig = np.cos(m * th) if j == 1 else np.sin(m * th)
            out = out + trig * clenshaw_eval(T, c, s)
    return out


def cf_radial_derivative(basis: ChebFourierBasis, U, x, y):
    """d/dr of the expansion at (x, y)."""
    U = np.asarray(U, dtype=float)
    n = U.shape[0]
    # T' = U-series; convert derivative coefficients back to T by the standard recurrence
    dT = np.zeros_like(U)
    for k in range(n - 2, -1, -1):
        nxt = dT[k + 2] if k + 2 < n else 0.0
        dT[k] = nxt + 2 * (k + 1) * U[k + 1]
    dT[0] *= 0.5
    return basis.scale * cf_evaluate(basis, dT, x, y)


__all__ = ["ChebFourierBasis", "cf_operators", "cf_mode_core", "cf_assemble",
           "cf_rhs", "cf_expand", "cf_expand_values", "cf_evaluate",
           "cf_radial_derivative", "boundary_rows"]
