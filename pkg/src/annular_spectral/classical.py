"""Classical orthogonal families: orthonormal Jacobi, Chebyshev T and the
ultraspherical C^(2) family, with Clenshaw evaluation, Gauss rules and
conversion matrices."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.fft import dct
from scipy.special import betaln

from .banded import BandedMatrix, tridiagonal
from .errors import InvalidParameter


@dataclass(frozen=True)
class ClassicalFamily:
    """A classical family on [lo, hi].

    ``kind`` is ``"jacobi"`` (orthonormal for (hi-x)^a (x-lo)^b), ``"chebyshev_t"``
    or ``"ultraspherical2"`` (both unnormalized, standard normalization).
    """
    kind: str
    a: float = 0.0
    b: float = 0.0
    lo: float = -1.0
    hi: float = 1.0

    def __post_init__(self):
        if self.kind not in ("jacobi", "chebyshev_t", "ultraspherical2"):
            raise InvalidParameter(f"unknown family kind {self.kind!r}")
        if self.kind == "jacobi" and (self.a <= -1 or self.b <= -1):
            raise InvalidParameter(f"Jacobi parameters must exceed -1, got ({self.a}, {self.b})")
        if not self.hi > self.lo:
            raise InvalidParameter("interval must have hi > lo")

    @property
    def orthonormal(self):
        return self.kind == "jacobi"

    @property
    def half_width(self):
        return 0.5 * (self.hi - self.lo)

    @property
    def center(self):
        return 0.5 * (self.hi + self.lo)

    def to_reference(self, x):
        return (np.asarray(x, dtype=float) - self.center) / self.half_width

    @property
    def weight_params(self):
        """(alpha, beta) of the Jacobi weight (1-y)^alpha (1+y)^beta on [-1, 1]."""
        if self.kind == "jacobi":
            return float(self.a), float(self.b)
        if self.kind == "chebyshev_t":
            return -0.5, -0.5
        return 1.5, 1.5

    @property
    def mass(self):
        """Integral of the weight over [lo, hi]."""
        al, be = self.weight_params
        return math.exp((al + be + 1) * math.log(self.hi - self.lo) + betaln(al + 1, be + 1))

    @property
    def p0(self):
        """Value of the degree-0 member."""
        if self.kind == "jacobi":
            return 1.0 / math.sqrt(self.mass)
        return 1.0

    def weight(self, x):
        al, be = self.weight_params
        x = np.asarray(x, dtype=float)
        return (self.hi - x) ** al * (x - self.lo) ** be

    def jacobi_matrix(self, N):
        return classical_jacobi_matrix(self, N)


def JacobiOrthonormal(a, b, lo=-1.0, hi=1.0):
    return ClassicalFamily("jacobi", a, b, lo, hi)


def ChebyshevT(lo=-1.0, hi=1.0):
    return ClassicalFamily("chebyshev_t", lo=lo, hi=hi)


def Ultraspherical2(lo=-1.0, hi=1.0):
    return ClassicalFamily("ultraspherical2", lo=lo, hi=hi)


def shifted_jacobi(a, b):
    """Orthonormal family on [0, 1] for the weight x^a (1-x)^b."""
    return JacobiOrthonormal(b, a, 0.0, 1.0)


def _jacobi_recurrence(alpha, beta, N):
    """Diagonal and off-diagonal of the orthonormal Jacobi matrix on [-1, 1]."""
    n = np.arange(N, dtype=float)
    s = alpha + beta
    with np.errstate(divide="ignore", invalid="ignore"):
        diag = (beta**2 - alpha**2) / ((2 * n + s) * (2 * n + s + 2))
        off = 2.0 / (2 * n + s + 2) * np.sqrt(
            (n + 1) * (n + s + 1) * (n + alpha + 1) * (n + beta + 1)
            / ((2 * n + s + 1) * (2 * n + s + 3)))
    if N:
        # n = 0 in closed form; avoids 0/0 when alpha + beta is 0 or -1
        diag[0] = (beta - alpha) / (s + 2)
        off[0] = 2.0 / (s + 2) * math.sqrt((alpha + 1) * (beta + 1) / (s + 3))
    return diag, off


def classical_jacobi_matrix(fam: ClassicalFamily, N: int) -> BandedMatrix:
    """N x N multiplication-by-x operator: x p(x) = p(x) X."""
    if fam.kind == "jacobi":
        d, e = _jacobi_recurrence(float(fam.a), float(fam.b), N)
        return tridiagonal(fam.center + fam.half_width * d, fam.half_width * e[: max(N - 1, 0)])
    n = np.arange(max(N - 1, 0), dtype=float)
    if fam.kind == "chebyshev_t":
        sub = np.full(n.shape, 0.5)
        if sub.size:
            sub[0] = 1.0
        sup = np.full(n.shape, 0.5)
    else:
        sub = (n + 1) / (2 * (n + 2))
        sup = (n + 4) / (2 * (n + 3))  # X[n, n+1], i.e. (k+3)/(2(k+2)) at k = n+1
    diag = np.full(N, fam.center)
    return tridiagonal(diag, fam.half_width * sup, fam.half_width * sub)


# ---------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------
def _recurrence_arrays(X: BandedMatrix, n):
    d = X.diag(0)[:n]
    sup = np.zeros(n)
    sub = np.zeros(n)
    ks = max(0, min(n, X.cols) - 1)
    sup[1:ks + 1] = X.diag(1)[:ks]   # sup[n] = X[n-1, n]
    kb = max(0, min(n, X.rows - 1))
    sub[:kb] = X.diag(-1)[:kb]       # sub[n] = X[n+1, n]
    return d, sup, sub


def eval_all(X: BandedMatrix, p0, n, x):
    """Values p_0..p_{n-1} at points x by forward recurrence; shape (len(x), n)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if n > X.rows:
        raise InvalidParameter(f"Jacobi matrix with {X.rows} rows cannot generate {n} polynomials")
    d, sup, sub = _recurrence_arrays(X, n)
    P = np.zeros((x.size, n))
    if n == 0:
        return P
    P[:, 0] = p0
    for k in range(n - 1):
        prev = P[:, k - 1] if k > 0 else 0.0
        P[:, k + 1] = ((x - d[k]) * P[:, k] - sup[k] * prev) / sub[k]
    return P


def clenshaw_eval(fam_or_X, coeffs, x, p0=None):
    """Evaluate sum_n c_n p_n(x) by Clenshaw's algorithm.

    ``fam_or_X`` is a ClassicalFamily or any tridiagonal Jacobi matrix whose
    subdiagonal is nonzero; with a bare matrix ``p0`` defaults to 1.  Points
    outside the orthogonality interval are evaluated without validation.
    """
    c = np.asarray(coeffs, dtype=float)
    n = c.shape[0]
    if isinstance(fam_or_X, ClassicalFamily):
        X = fam_or_X.jacobi_matrix(n + 1)
        p0 = fam_or_X.p0 if p0 is None else p0
    else:
        X = fam_or_X
        p0 = 1.0 if p0 is None else p0
    x = np.asarray(x, dtype=float)
    if n == 0:
        return np.zeros(x.shape)
    m = min(n, X.cols)
    if m < n:
        raise InvalidParameter(f"Jacobi matrix of size {X.cols} is too small for {n} coefficients")
    d, sup, sub = _recurrence_arrays(X, n)
    b1 = np.zeros(x.shape)
    b2 = np.zeros(x.shape)
    for k in range(n - 1, -1, -1):
        alpha = (x - d[k]) / sub[k] if sub[k] != 0 else 0.0 * x
        beta_next = sup[k + 1] / sub[k + 1] if k + 1 < n and sub[k + 1] != 0 else 0.0
        b1, b2 = c[k] + alpha * b1 - beta_next * b2, b1
    return p0 * b1


# ---------------------------------------------------------------------
# Gauss quadrature (Golub-Welsch)
# ---------------------------------------------------------------------
@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray

    def integrate(self, f):
        return float(np.dot(self.weights, f(self.nodes)))


def tridiagonal_eigen(diag, off):
    """Eigenvalues and first eigenvector components of a symmetric tridiagonal
    matrix by implicit-shift QL.  Returns (eigenvalues ascending, first components)."""
    d = [float(v) for v in diag]
    n = len(d)
    e = [float(v) for v in off] + [0.0]
    z = [0.0] * n
    if n:
        z[0] = 1.0
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) + dd == dd:
                    break
                m += 1
            if m == l:
                break
            it += 1
            if it > 60:
                raise np.linalg.LinAlgError("tridiagonal QL failed to converge")
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            i = m - 1
            deflated = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    deflated = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                f = z[i + 1]
                z[i + 1] = s * z[i] + c * f
                z[i] = c * z[i] - s * f
                i -= 1
            if deflated:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    d = np.array(d)
    z = np.array(z)
    order = np.argsort(d)
    return d[order], z[order]


def gauss_rule(fam: ClassicalFamily, n: int) -> QuadratureRule:
    """n-point Gauss rule for the family's weight on [lo, hi]."""
    if n < 1:
        raise InvalidParameter("a Gauss rule needs at least one node")
    al, be = fam.weight_params
    d, e = _jacobi_recurrence(al, be, n)
    y, z = tridiagonal_eigen(d, e[: n - 1])
    return QuadratureRule(fam.center + fam.half_width * y, fam.mass * z**2)


def gauss_jacobi_unit(a, b, n):
    """Gauss rule on [0, 1] for x^a (1-x)^b."""
    return gauss_rule(shifted_jacobi(a, b), n)


# ---------------------------------------------------------------------
# conversion and differentiation
# ---------------------------------------------------------------------
def conversion_T_to_U(N):
    """T(x) = U(x) R, N x N."""
    n = np.arange(N, dtype=float)
    d0 = np.full(N, 0.5)
    if N:
        d0[0] = 1.0
    return BandedMatrix.from_diagonals({0: d0, 2: -0.5 * np.ones(max(N - 2, 0))}, N, N)


def conversion_U_to_C2(N):
    """U(x) = C2(x) R, N x N."""
    n = np.arange(N, dtype=float)
    return BandedMatrix.from_diagonals({0: 1.0 / (n + 1), 2: -1.0 / (n[2:] + 1)}, N, N)


def conversion_T_to_C2(N) -> BandedMatrix:
    """T(x) = C2(x) R; nonzeros on offsets 0, 2, 4."""
    return (conversion_U_to_C2(N) @ conversion_T_to_U(N)).with_bandwidths(0, 4)


def chebyshev_T_coeffs(values_at_nodes):
    """Chebyshev T coefficients from values at first-kind nodes cos((2k+1)pi/(2K)),
    k = 0..K-1, along axis 0."""
    v = np.asarray(values_at_nodes, dtype=float)
    K = v.shape[0]
    c = dct(v, type=2, axis=0) / K
    c[0] *= 0.5
    return c


def chebyshev_T_values(coeffs, K=None):
    """Inverse of :func:`chebyshev_T_coeffs` at K first-kind nodes (K >= len(coeffs))."""
    c = np.asarray(coeffs, dtype=float)
    K = c.shape[0] if K is None else K
    if K < c.shape[0]:
        raise InvalidParameter("need at least as many nodes as coefficients")
    pad = np.zeros((K,) + c.shape[1:])
    pad[: c.shape[0]] = c
    pad[0] *= 2.0
    return dct(pad, type=3, axis=0) / 2.0


def chebyshev_nodes(K):
    """First-kind Chebyshev nodes cos((2k+1)pi/(2K)), k = 0..K-1 (decreasing)."""
    return np.cos((2 * np.arange(K) + 1) * np.pi / (2 * K))


def conversion_T_to_jacobi(a, b, N):
    """Upper-triangular R_T and diagonal scaling s with

        P^{(a,b)}(y) = T(y) R_T          (orthonormal on [-1, 1])
        x^a (1-x)^b orthonormal family on [0, 1]  =  T(1-2x) R_T diag(s).

    Columns are Chebyshev projections of the Jacobi polynomials, computed from
    values at N first-kind Chebyshev nodes.  Integer a, b only.
    """
    for v, name in ((a, "a"), (b, "b")):
        if float(v) != int(v) or v < 0:
            raise InvalidParameter(f"conversion_T_to_jacobi supports nonnegative integer {name}, got {v}")
    a, b = int(a), int(b)
    fam = JacobiOrthonormal(a, b)
    y = chebyshev_nodes(N)
    P = eval_all(fam.jacobi_matrix(N), fam.p0, N, y)
    C = np.triu(chebyshev_T_coeffs(P))
    R = BandedMatrix.from_dense(C, 0, max(N - 1, 0))
    s = (-1.0) ** np.arange(N) * 2.0 ** ((a + b + 1) / 2)
    return R, s


def jacobi_derivative(a, b, N):
    """d/dx of the x^a (1-x)^b orthonormal family on [0, 1] expressed in the
    (a+1, b+1) family; single superdiagonal, N x N."""
    n = np.arange(1, N, dtype=float)
    return BandedMatrix.from_diagonals({1: np.sqrt(n * (n + a + b + 1))}, N, N)
