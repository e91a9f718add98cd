"""Generalised Zernike annular polynomials and Zernike disk polynomials:
evaluation, the analysis/synthesis grid, coefficient layout and operator
matrices.

Z_{n,m,j}(x, y) = Y_{m,j}(x, y) Q^{t,(a,b,m)}_{(n-m)/2}(tau),
tau = (1 - r^2) / (1 - rho^2),  t = 1 / (1 - rho^2),
Y_{m,1} = Re (x + iy)^m,  Y_{m,0} = Im (x + iy)^m.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .banded import BandedMatrix, shifted_identity_minus
from .classical import chebyshev_T_coeffs, chebyshev_T_values, gauss_jacobi_unit
from .errors import GridMismatch, InvalidMode, InvalidParameter
from .semiclassical import (SemiclassicalFamily, diff_up, diff_weighted,
                            from_chebyshev_coeffs, general_raise_connection,
                            to_chebyshev_coeffs, unit_raise)


@dataclass(frozen=True)
class AnnulusParams:
    rho: float
    a: float = 0.0
    b: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise InvalidParameter(f"inner radius must lie in (0, 1), got {self.rho}")
        if self.a <= -1 or self.b <= -1:
            raise InvalidParameter(f"weight exponents must exceed -1, got ({self.a}, {self.b})")

    @property
    def t(self):
        return 1.0 / ((1.0 - self.rho) * (1.0 + self.rho))

    def family(self, m, da=0, db=0, dc=0):
        return SemiclassicalFamily(self.t, self.a + da, self.b + db, int(m + dc))

    def tau(self, x, y):
        r = np.hypot(x, y)
        return self.t * (1.0 - r) * (1.0 + r)

    def weight(self, x, y):
        r = np.hypot(x, y)
        return ((1.0 - r) * (1.0 + r)) ** self.a * ((r - self.rho) * (r + self.rho)) ** self.b

    def mode_norm2(self, m):
        """<Z_{n,m,j}, Z_{n,m,j}> in the (a,b) annulus inner product."""
        return math.pi * (2.0 if m == 0 else 1.0) / 2.0 * self.t ** -(self.a + self.b + m + 1)


def check_mode(n, m, j):
    if m < 0 or n < m or (n - m) % 2:
        raise InvalidMode(f"invalid degree/order pair (n={n}, m={m})")
    if j not in (0, 1) or (m == 0 and j != 1):
        raise InvalidMode(f"invalid trigonometric index j={j} for m={m}")


def harmonic(m, j, x, y):
    """Y_{m,j}(x, y)."""
    z = (np.asarray(x, dtype=float) + 1j * np.asarray(y, dtype=float)) ** m
    return z.real if j == 1 else z.imag


def mode_size(N, m):
    """Number of mode-m members of degree <= N."""
    return max(0, (N - m) // 2 + 1)


def mode_values(params: AnnulusParams, m, j, count, x, y, weighted=False):
    """Columns Z_{m+2i,m,j}(x, y), i < count; shape (len(x), count)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    fam = params.family(m)
    V = harmonic(m, j, x, y)[:, None] * fam.eval(count, params.tau(x, y))
    if weighted:
        V *= params.weight(x, y)[:, None]
    return V


def eval_Z(params: AnnulusParams, n, mode, x, y):
    m, j = mode
    check_mode(n, m, j)
    i = (n - m) // 2
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    coeffs = np.zeros(i + 1)
    coeffs[i] = 1.0
    return harmonic(m, j, x, y) * params.family(m).clenshaw(coeffs, params.tau(x, y))


def eval_weighted_W(params: AnnulusParams, n, mode, x, y):
    return params.weight(x, y) * eval_Z(params, n, mode, x, y)


# ---------------------------------------------------------------------
# operator matrices
# ---------------------------------------------------------------------
def lowering_weighted(params: AnnulusParams, m, k):
    """k x k pentadiagonal L with W^{(1,1)}_{m,j} = Z^{(1,1)}_{m,j} L."""
    if (params.a, params.b) != (1, 1):
        raise InvalidParameter("the weighted lowering is defined for a = b = 1")
    low = SemiclassicalFamily(params.t, 0, 0, m)
    R = general_raise_connection(low, da=1, db=1, N=k + 2)
    L = (R @ R.T).truncate(k).with_bandwidths(2, 2)
    return L * params.t ** -2


def laplacian_Z(params: AnnulusParams, m, k):
    """k x k upper-triangular matrix with Delta Z^{(a,b)}_{m,j} = Z^{(a+2,b+2)}_{m,j} D."""
    fam = params.family(m)
    Dc = diff_weighted(params.family(m, 1, 1, 1), "c", k + 2)
    D = (Dc @ diff_up(fam, k + 2)).truncate(k).with_bandwidths(0, 3)
    return D * (4.0 * params.t)


def laplacian_W(params: AnnulusParams, m, k):
    """k x k tridiagonal matrix with Delta W^{(1,1)}_{m,j} = Z^{(1,1)}_{m,j} D."""
    if (params.a, params.b) != (1, 1):
        raise InvalidParameter("the weighted Laplacian is defined for a = b = 1")
    t = params.t
    Dc = diff_weighted(SemiclassicalFamily(t, 0, 0, m + 1), "c", k + 2)
    Dab = diff_weighted(SemiclassicalFamily(t, 1, 1, m), "ab", k + 2)
    return (Dc @ Dab).truncate(k).with_bandwidths(1, 1) * (4.0 / t)


def mult_r2(params: AnnulusParams, m, k):
    """k x k tridiagonal M with r^2 Z_{m,j} = Z_{m,j} M."""
    X = params.family(m).jacobi_matrix(k)
    return shifted_identity_minus(X * (1.0 / params.t), 1.0)


def mult_xy(params: AnnulusParams, m, axis, j, k):
    """Blocks of multiplication by x or y acting on mode (m, j) with k members.

    Returns a list of ((m', j'), B) with x Z_{m,j} (or y Z_{m,j}) =
    sum Z_{m',j'} B; B has k + 1 rows for m' = m - 1 and k rows for m' = m + 1.
    """
    check_mode(m, m, j)
    if axis not in ("x", "y"):
        raise InvalidMode(f"axis must be 'x' or 'y', got {axis!r}")
    t = params.t
    up = unit_raise(params.family(m), "c", k)              # Q^{m} = Q^{m+1} up
    blocks = []
    half = 1.0 if m == 0 else 0.5
    if axis == "x":
        jd, sd, su = j, 1.0, 1.0
    else:
        jd = 1 - j
        sd, su = (-1.0, 1.0) if j == 1 else (1.0, -1.0)
    if m >= 1 and not (m - 1 == 0 and jd == 0):
        down = unit_raise(params.family(m - 1), "c", k + 1).T  # (t - x) Q^{m} = Q^{m-1} down
        B = BandedMatrix.from_dense(down.todense()[:, :k], 1, 0) * (0.5 * sd / t)
        blocks.append(((m - 1, jd), B))
    blocks.append(((m + 1, jd), up * (half * su)))
    return blocks


# ---------------------------------------------------------------------
# coefficient layout
# ---------------------------------------------------------------------
def mode_columns(N):
    """(m, j) for each column of the coefficient matrix."""
    cols = [(0, 1)]
    for m in range(1, N + 1):
        cols += [(m, 0), (m, 1)]
    return cols


def column_index(m, j):
    return 0 if m == 0 else 2 * m - 1 + j


@dataclass
class ModeCoefficients:
    """Coefficients f_{n,m,j}, n <= N, stored as an (N//2 + 1) x (2N + 1) matrix
    whose column (m, j) holds f_{m,m,j}, f_{m+2,m,j}, ... (zero padded)."""
    N: int
    matrix: np.ndarray = field(default=None)

    def __post_init__(self):
        shape = (self.N // 2 + 1, 2 * self.N + 1)
        if self.matrix is None:
            self.matrix = np.zeros(shape)
        else:
            self.matrix = np.asarray(self.matrix, dtype=float)
            if self.matrix.shape != shape:
                raise GridMismatch(f"coefficient matrix has shape {self.matrix.shape}, expected {shape}")

    def mode(self, m, j):
        return self.matrix[: mode_size(self.N, m), column_index(m, j)]

    def set_mode(self, m, j, values):
        k = mode_size(self.N, m)
        v = np.asarray(values, dtype=float)
        col = np.zeros(self.matrix.shape[0])
        col[: min(k, v.shape[0])] = v[:k]
        self.matrix[:, column_index(m, j)] = col

    @staticmethod
    def ordering(N):
        """(n, m, j) in the interlaced global order."""
        out = []
        for n in range(N + 1):
            for m in range(n % 2, n + 1, 2):
                for j in ((1,) if m == 0 else (0, 1)):
                    out.append((n, m, j))
        return out

    def to_vector(self):
        return np.array([self.matrix[(n - m) // 2, column_index(m, j)]
                         for n, m, j in self.ordering(self.N)])

    @classmethod
    def from_vector(cls, N, v):
        out = cls(N)
        order = cls.ordering(N)
        v = np.asarray(v, dtype=float)
        if v.shape[0] != len(order):
            raise GridMismatch(f"expected {len(order)} coefficients, got {v.shape[0]}")
        for val, (n, m, j) in zip(v, order):
            out.matrix[(n - m) // 2, column_index(m, j)] = val
        return out

    @property
    def ndofs(self):
        return (self.N + 1) * (self.N + 2) // 2

    def pad(self, N):
        """Same expansion at a larger even degree."""
        out = ModeCoefficients(N)
        for m, j in mode_columns(min(N, self.N)):
            out.set_mode(m, j, self.mode(m, j))
        return out


def even_degree(N):
    return N + (N % 2)


# ---------------------------------------------------------------------
# grid, synthesis, analysis
# ---------------------------------------------------------------------
@dataclass(frozen=True)
class AnnulusGrid:
    rho: float
    N: int

    @property
    def K(self):
        return (self.N + 1) // 2 + 1

    @property
    def L(self):
        return 4 * self.K - 3

    @property
    def phase(self):
        return (2 * np.arange(self.K) + 1) * np.pi / (4 * self.K)

    @property
    def r(self):
        p = self.phase
        return np.sqrt(np.cos(p) ** 2 + self.rho**2 * np.sin(p) ** 2)

    @property
    def tau(self):
        return np.sin(self.phase) ** 2

    @property
    def theta(self):
        return 2 * np.pi * np.arange(self.L) / self.L

    def points(self):
        r, th = self.r, self.theta
        return r[:, None] * np.cos(th)[None, :], r[:, None] * np.sin(th)[None, :]


def _trig_matrix(N, theta):
    """Rows cos/sin(m theta) for each coefficient column."""
    rows = []
    for m, j in mode_columns(N):
        rows.append(np.cos(m * theta) if j == 1 else np.sin(m * theta))
    return np.array(rows)


def _radial_prefactor(params, m, r):
    # r^m = t^{-m/2} (t - tau)^{m/2}; the odd half power is sqrt(t) r
    scale = params.t ** (-m / 2.0)
    return scale * (math.sqrt(params.t) * r if m % 2 else np.ones_like(r))


def synthesis(params: AnnulusParams, coeffs: ModeCoefficients, grid: AnnulusGrid = None, weighted=False):
    """Values on the (r_k, theta_l) grid, shape (K, L)."""
    N = coeffs.N
    if grid is None:
        grid = AnnulusGrid(params.rho, N)
    K = grid.K
    r = grid.r
    V = np.zeros((K, 2 * N + 1))
    for m, j in mode_columns(N):
        f = coeffs.mode(m, j)
        if not np.any(f):
            continue
        h, tag = to_chebyshev_coeffs(params.family(m), "half_c", f)
        if h.shape[0] > K:
            if np.any(h[K:]):
                raise GridMismatch(f"grid with K={K} cannot resolve mode {m}")
            h = h[:K]
        V[:, column_index(m, j)] = chebyshev_T_values(h, K) * _radial_prefactor(params, m, r)
    F = V @ _trig_matrix(N, grid.theta)
    if weighted:
        x, y = grid.points()
        F *= params.weight(x, y)
    return F


def analysis(params: AnnulusParams, values, N, weighted=False):
    """Coefficients of degree <= N from values on AnnulusGrid(rho, N)."""
    grid = AnnulusGrid(params.rho, N)
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.K, grid.L):
        raise GridMismatch(f"values have shape {values.shape}, grid is {(grid.K, grid.L)}")
    if weighted:
        x, y = grid.points()
        values = values / params.weight(x, y)
    L = grid.L
    F = np.fft.rfft(values, axis=1) / L
    out = ModeCoefficients(N)
    r = grid.r
    for m, j in mode_columns(N):
        if m >= F.shape[1]:
            break
        radial = (F[:, m].real * (1 if m == 0 else 2) if j == 1 else -2 * F[:, m].imag)
        radial = radial / _radial_prefactor(params, m, r)
        cheb = chebyshev_T_coeffs(radial)
        out.set_mode(m, j, from_chebyshev_coeffs(params.family(m), "half_c", cheb, mode_size(N, m)))
    return out


def evaluate(params: AnnulusParams, coeffs: ModeCoefficients, x, y, weighted=False):
    """Pointwise evaluation by per-mode Clenshaw sums."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    tau = params.tau(x, y)
    out = np.zeros(np.broadcast(x, y).shape)
    for m, j in mode_columns(coeffs.N):
        f = coeffs.mode(m, j)
        if np.any(f):
            out = out + harmonic(m, j, x, y) * params.family(m).clenshaw(f, tau)
    if weighted:
        out = out * params.weight(x, y)
    return out


# ---------------------------------------------------------------------
# Zernike disk
# ---------------------------------------------------------------------
@dataclass(frozen=True)
class DiskMode:
    """Mode-m Zernike disk polynomials Z^{(b)}_{m+2i,m,j} = Y_{m,j} P^{(b,m)}_i(2r^2 - 1),
    P orthonormal on [-1, 1]; equivalently 2^{-(m+b+1)/2} Y_{m,j} Q^{(m,b,0)}_i(r^2).
    ``radius`` rescales the cell: functions are evaluated at (x, y) / radius."""
    b: float
    m: int
    radius: float = 1.0

    def __post_init__(self):
        if self.b <= -1:
            raise InvalidParameter(f"b must exceed -1, got {self.b}")
        if self.m < 0:
            raise InvalidMode(f"m must be nonnegative, got {self.m}")

    @property
    def family(self):
        return SemiclassicalFamily(None, self.m, self.b, 0)

    def scale(self, b=None):
        b = self.b if b is None else b
        return 2.0 ** (-(self.m + b + 1) / 2.0)

    def values(self, j, count, x, y):
        x = np.atleast_1d(np.asarray(x, dtype=float)) / self.radius
        y = np.atleast_1d(np.asarray(y, dtype=float)) / self.radius
        u = x * x + y * y
        return self.scale() * harmonic(self.m, j, x, y)[:, None] * self.family.eval(count, u)

    def radial_values(self, count, r):
        """g_i(r) with Z_i = g_i(r) * trig(m theta)."""
        s = np.atleast_1d(np.asarray(r, dtype=float)) / self.radius
        return self.scale() * (s**self.m)[:, None] * self.family.eval(count, s * s)

    def radial_derivatives(self, count, r):
        """d/dr g_i(r)."""
        s = np.atleast_1d(np.asarray(r, dtype=float)) / self.radius
        fam = self.family
        up = SemiclassicalFamily(None, self.m + 1, self.b + 1, 0)
        P = fam.eval(count, s * s)
        dP = up.eval(count, s * s) @ diff_up(fam, count).todense()
        g = self.m * s ** max(self.m - 1, 0) * P if self.m else np.zeros_like(P)
        g = g + (s ** (self.m + 1) * 2.0)[:, None] * dP
        return self.scale() * g / self.radius

    def laplacian(self, k):
        """k x k matrix with Delta Z^{(b)}_m = Z^{(b+2)}_m D; one superdiagonal when b = 0."""
        fam = self.family
        Da = diff_weighted(SemiclassicalFamily(None, self.m + 1, self.b + 1, 0), "a", k + 2)
        D = (Da @ diff_up(fam, k + 2)).truncate(k)
        D = D * (4.0 * self.scale() / self.scale(self.b + 2) / self.radius**2)
        if self.b == 0:
            return D.with_bandwidths(0, 1)
        return D.with_bandwidths(0, 2)

    def raise2(self, k):
        """k x k upper-triangular R with Z^{(b)}_m = Z^{(b+2)}_m R."""
        R = general_raise_connection(self.family, db=2, N=k)
        return R * (self.scale() / self.scale(self.b + 2))


def zernike_disk_basis(b, m, radius=1.0):
    return DiskMode(b, m, radius)


def disk_gauss_rule(b, m, n):
    """Gauss rule in u = r^2 on [0, 1] for u^m (1-u)^b."""
    return gauss_jacobi_unit(m, b, n)


def disk_weighted_laplacian(m, k, radius=1.0):
    """k x k matrix with Delta[(1 - r^2) Z^{(1)}_m] = Z^{(1)}_m D (diagonal)."""
    inner = SemiclassicalFamily(None, m, 1, 0)
    Db = diff_weighted(inner, "b", k + 2)
    Da = diff_weighted(SemiclassicalFamily(None, m + 1, 0, 0), "a", k + 2)
    return (Da @ Db).truncate(k).with_bandwidths(0, 0) * (4.0 / radius**2)


def disk_weighted_lowering(m, k):
    """k x k tridiagonal L with (1 - r^2) Z^{(1)}_m = Z^{(1)}_m L."""
    X = SemiclassicalFamily(None, m, 1, 0).jacobi_matrix(k)
    return shifted_identity_minus(X, 1.0)


# ---------------------------------------------------------------------
# tensor-grid evaluation and disk projection
# ---------------------------------------------------------------------
def trig_rows(N, theta):
    """cos/sin(m theta) for each coefficient column, shape (2N + 1, len(theta))."""
    return _trig_matrix(N, np.asarray(theta, dtype=float))


def radial_values(params: AnnulusParams, m, count, r):
    """g_i(r) with Z_{m+2i,m,1}(r, 0) = g_i(r), shape (len(r), count)."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    tau = params.t * (1.0 - r) * (1.0 + r)
    return (r**m)[:, None] * params.family(m).eval(count, tau)


def radial_derivatives(params: AnnulusParams, m, count, r):
    """d/dr of :func:`radial_values`."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    t = params.t
    tau = t * (1.0 - r) * (1.0 + r)
    fam = params.family(m)
    P = fam.eval(count, tau)
    dP = fam.shifted(a=1, b=1, c=1).eval(count, tau) @ diff_up(fam, count).todense()
    g = (m * r ** max(m - 1, 0))[:, None] * P if m else np.zeros_like(P)
    return g - (2.0 * t * r ** (m + 1))[:, None] * dP


def polar_values(params: AnnulusParams, coeffs: ModeCoefficients, r, theta, weighted=False):
    """Expansion values on the tensor grid r x theta, shape (len(r), len(theta))."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    N = coeffs.N
    tau = params.t * (1.0 - r) * (1.0 + r)
    G = np.zeros((r.size, 2 * N + 1))
    for m, j in mode_columns(N):
        f = coeffs.mode(m, j)
        if np.any(f):
            G[:, column_index(m, j)] = r**m * params.family(m).clenshaw(f, tau)
    F = G @ trig_rows(N, theta)
    if weighted:
        w = (1.0 - r * r) ** params.a * ((r - params.rho) * (r + params.rho)) ** params.b
        F *= w[:, None]
    return F


def disk_polar_values(b, coeffs: ModeCoefficients, r, theta, radius=1.0, weighted=False):
    """Disk expansion in Z^{(b)} (scaled to ``radius``) on a tensor grid; with
    ``weighted`` the expansion is multiplied by 1 - (r/radius)^2."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    N = coeffs.N
    G = np.zeros((r.size, 2 * N + 1))
    for m, j in mode_columns(N):
        f = coeffs.mode(m, j)
        if np.any(f):
            G[:, column_index(m, j)] = DiskMode(b, m, radius).radial_values(f.shape[0], r) @ f
    F = G @ trig_rows(N, theta)
    if weighted:
        s = r / radius
        F *= (1.0 - s * s)[:, None]
    return F


def disk_analysis(f, N, b, radius=1.0, n_radial=None, n_angle=None):
    """Project f(x, y) onto the disk functions Z^{(b)}_{n,m,j}(x/radius, y/radius),
    n <= N, by Gauss-Legendre quadrature in r and the FFT in theta."""
    M = 2 * N + 10 if n_radial is None else n_radial
    L = 2 * N + 1 if n_angle is None else n_angle
    s, w = np.polynomial.legendre.leggauss(M)
    s = 0.5 * (s + 1.0)              # r / radius on (0, 1)
    w = 0.5 * w
    th = 2 * np.pi * np.arange(L) / L
    x = radius * s[:, None] * np.cos(th)[None, :]
    y = radius * s[:, None] * np.sin(th)[None, :]
    vals = np.asarray(f(x, y), dtype=float) * np.ones_like(x)
    F = np.fft.rfft(vals, axis=1) / L
    out = ModeCoefficients(N)
    u = s * s
    for m, j in mode_columns(N):
        if m >= F.shape[1]:
            break
        fm = F[:, m].real * (1 if m == 0 else 2) if j == 1 else -2 * F[:, m].imag
        k = mode_size(N, m)
        mode = DiskMode(b, m)
        Q = mode.family.eval(k, u)
        # c_i = (1/scale) int_0^1 f_m(r) r^m Q_i(r^2) (1 - r^2)^b 2r dr
        wr = w * fm * s ** (m + 1) * (1.0 - u) ** b * 2.0
        out.set_mode(m, j, (wr @ Q) / mode.scale())
    return out
