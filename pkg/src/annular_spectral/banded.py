"""Banded storage, banded Cholesky / Householder QR, O(N) similarity
transforms and almost-banded (bordered) solves."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import (DimensionMismatch, NotPositiveDefinite, RankDeficient,
                     SingularR, SingularSystem)

# pivot <= CHOL_TOL * max(diag) is treated as indefinite
CHOL_TOL = 1e-14
# |R[i,i]| below this (relative to max |diag|) is treated as singular
SINGULAR_TOL = 1e-14


class BandedMatrix:
    """Rectangular matrix stored by diagonals.

    Storage follows the LAPACK ``ab`` layout used by
    :func:`scipy.linalg.solve_banded`: ``data[u + i - j, j] = A[i, j]``.
    """

    __slots__ = ("rows", "cols", "lower_bw", "upper_bw", "data")

    def __init__(self, rows, cols, lower_bw, upper_bw, data=None):
        self.rows = int(rows)
        self.cols = int(cols)
        self.lower_bw = int(lower_bw)
        self.upper_bw = int(upper_bw)
        if self.lower_bw < 0 or self.upper_bw < 0:
            raise ValueError("bandwidths must be nonnegative")
        shape = (self.lower_bw + self.upper_bw + 1, self.cols)
        if data is None:
            data = np.zeros(shape)
        else:
            data = np.asarray(data, dtype=float)
            if data.shape != shape:
                raise DimensionMismatch(f"band data has shape {data.shape}, expected {shape}")
        self.data = data

    # -- construction -------------------------------------------------
    @classmethod
    def from_dense(cls, A, lower_bw=None, upper_bw=None, tol=0.0):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        m, n = A.shape
        if lower_bw is None or upper_bw is None:
            i, j = np.nonzero(np.abs(A) > tol)
            lo = int(max(0, (i - j).max())) if i.size else 0
            up = int(max(0, (j - i).max())) if i.size else 0
            lower_bw = lo if lower_bw is None else lower_bw
            upper_bw = up if upper_bw is None else upper_bw
        B = cls(m, n, lower_bw, upper_bw)
        for k in range(-lower_bw, upper_bw + 1):
            B.set_diag(k, np.diagonal(A, k))
        return B

    @classmethod
    def from_diagonals(cls, diags, rows, cols):
        """Build from ``{offset: values}`` (offset > 0 is above the diagonal)."""
        lo = max([0] + [-k for k in diags])
        up = max([0] + [k for k in diags])
        B = cls(rows, cols, lo, up)
        for k, v in diags.items():
            B.set_diag(k, v)
        return B

    @classmethod
    def identity(cls, n):
        return cls(n, n, 0, 0, np.ones((1, n)))

    @classmethod
    def from_sparse(cls, S, lower_bw=None, upper_bw=None):
        S = sp.coo_matrix(S)
        m, n = S.shape
        i, j, v = S.row, S.col, S.data
        keep = v != 0
        i, j, v = i[keep], j[keep], v[keep]
        if lower_bw is None:
            lower_bw = int(max(0, (i - j).max())) if i.size else 0
        if upper_bw is None:
            upper_bw = int(max(0, (j - i).max())) if i.size else 0
        B = cls(m, n, lower_bw, upper_bw)
        inside = ((i - j) <= lower_bw) & ((j - i) <= upper_bw)
        if not np.all(inside):
            raise DimensionMismatch("sparse entries fall outside the declared band")
        np.add.at(B.data, (upper_bw + i - j, j), v)
        return B

    # -- access -------------------------------------------------------
    @property
    def shape(self):
        return (self.rows, self.cols)

    def _diag_slice(self, k):
        # columns j with 0 <= j-k < rows, 0 <= j < cols
        j0 = max(0, k)
        j1 = min(self.cols, self.rows + k)
        return j0, max(j0, j1)

    def diag(self, k=0):
        if k > self.upper_bw or -k > self.lower_bw:
            j0, j1 = self._diag_slice(k)
            return np.zeros(j1 - j0)
        j0, j1 = self._diag_slice(k)
        return self.data[self.upper_bw - k, j0:j1].copy()

    def set_diag(self, k, values):
        if k > self.upper_bw or -k > self.lower_bw:
            raise DimensionMismatch(f"offset {k} outside band ({self.lower_bw}, {self.upper_bw})")
        j0, j1 = self._diag_slice(k)
        values = np.broadcast_to(np.asarray(values, dtype=float), (len(np.atleast_1d(values)),))
        L = min(j1 - j0, values.shape[0])
        self.data[self.upper_bw - k, j0:j0 + L] = values[:L]

    def entry(self, i, j):
        if not (0 <= i < self.rows and 0 <= j < self.cols):
            raise IndexError((i, j))
        if j - i > self.upper_bw or i - j > self.lower_bw:
            return 0.0
        return float(self.data[self.upper_bw + i - j, j])

    def todense(self):
        A = np.zeros((self.rows, self.cols))
        for k in range(-self.lower_bw, self.upper_bw + 1):
            j0, j1 = self._diag_slice(k)
            if j1 > j0:
                idx = np.arange(j0, j1)
                A[idx - k, idx] = self.data[self.upper_bw - k, j0:j1]
        return A

    def tosparse(self):
        offs, vals = [], []
        for k in range(-self.lower_bw, self.upper_bw + 1):
            j0, j1 = self._diag_slice(k)
            if j1 > j0:
                offs.append(k)
                vals.append(self.data[self.upper_bw - k, j0:j1])
        if not offs:
            return sp.csr_matrix((self.rows, self.cols))
        return sp.diags(vals, offs, shape=self.shape, format="csr")

    def copy(self):
        return BandedMatrix(self.rows, self.cols, self.lower_bw, self.upper_bw, self.data.copy())

    # -- structure ----------------------------------------------------
    @property
    def T(self):
        B = BandedMatrix(self.cols, self.rows, self.upper_bw, self.lower_bw)
        for k in range(-self.lower_bw, self.upper_bw + 1):
            B.set_diag(-k, self.diag(k))
        return B

    def truncate(self, rows, cols=None):
        cols = rows if cols is None else cols
        if rows > self.rows or cols > self.cols:
            raise DimensionMismatch(f"cannot truncate {self.shape} to {(rows, cols)}")
        B = BandedMatrix(rows, cols, self.lower_bw, self.upper_bw, self.data[:, :cols].copy())
        B._zero_outside()
        return B

    def _zero_outside(self):
        # clear storage slots that do not correspond to matrix entries
        u = self.upper_bw
        for k in range(-self.lower_bw, u + 1):
            j0, j1 = self._diag_slice(k)
            self.data[u - k, :j0] = 0.0
            self.data[u - k, j1:] = 0.0

    def effective_bandwidths(self, tol=0.0):
        """(lower, upper) bandwidths of entries with magnitude > tol."""
        lo = up = 0
        for k in range(-self.lower_bw, self.upper_bw + 1):
            if np.any(np.abs(self.diag(k)) > tol):
                if k < 0:
                    lo = max(lo, -k)
                else:
                    up = max(up, k)
        return lo, up

    def compress(self, tol=0.0):
        lo, up = self.effective_bandwidths(tol)
        B = BandedMatrix(self.rows, self.cols, lo, up)
        for k in range(-lo, up + 1):
            B.set_diag(k, self.diag(k))
        return B

    def with_bandwidths(self, lower_bw, upper_bw):
        B = BandedMatrix(self.rows, self.cols, lower_bw, upper_bw)
        for k in range(-min(lower_bw, self.lower_bw), min(upper_bw, self.upper_bw) + 1):
            B.set_diag(k, self.diag(k))
        return B

    # -- arithmetic ---------------------------------------------------
    def __matmul__(self, other):
        if isinstance(other, BandedMatrix):
            if self.cols != other.rows:
                raise DimensionMismatch(f"{self.shape} @ {other.shape}")
            P = self.tosparse() @ other.tosparse()
            return BandedMatrix.from_sparse(P, self.lower_bw + other.lower_bw,
                                            self.upper_bw + other.upper_bw)
        x = np.asarray(other, dtype=float)
        if x.shape[0] != self.cols:
            raise DimensionMismatch(f"{self.shape} @ {x.shape}")
        return self.tosparse() @ x

    def __mul__(self, scalar):
        return BandedMatrix(self.rows, self.cols, self.lower_bw, self.upper_bw, self.data * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __add__(self, other):
        if not isinstance(other, BandedMatrix):
            return NotImplemented
        if self.shape != other.shape:
            raise DimensionMismatch(f"{self.shape} + {other.shape}")
        lo = max(self.lower_bw, other.lower_bw)
        up = max(self.upper_bw, other.upper_bw)
        B = BandedMatrix(self.rows, self.cols, lo, up)
        for M in (self, other):
            B.data[up - M.upper_bw:up + M.lower_bw + 1] += M.data
        return B

    def __sub__(self, other):
        return self + (-other)

    def __repr__(self):
        return (f"BandedMatrix({self.rows}x{self.cols}, lower_bw={self.lower_bw}, "
                f"upper_bw={self.upper_bw})")


def tridiagonal(diag, off, sub=None):
    """Square tridiagonal BandedMatrix; symmetric when ``sub`` is omitted."""
    diag = np.asarray(diag, dtype=float)
    n = diag.shape[0]
    off = np.asarray(off, dtype=float)[: n - 1]
    sub = off if sub is None else np.asarray(sub, dtype=float)[: n - 1]
    return BandedMatrix.from_diagonals({-1: sub, 0: diag, 1: off}, n, n)


def shifted_identity_minus(X, shift):
    """shift*I - X for square X."""
    B = -X
    if B.lower_bw == B.upper_bw == 0 and B.rows == 0:
        return B
    B.data[B.upper_bw, : min(B.rows, B.cols)] += shift
    return B


# ---------------------------------------------------------------------
# Cholesky
# ---------------------------------------------------------------------
def banded_cholesky(A: BandedMatrix) -> BandedMatrix:
    """Upper-triangular banded R with A = R^T R."""
    if A.rows != A.cols:
        raise DimensionMismatch("Cholesky needs a square matrix")
    n, u = A.rows, A.upper_bw
    if n == 0:
        return BandedMatrix(0, 0, 0, u)
    d = A.diag(0)
    scale = max(float(np.max(np.abs(d))), np.finfo(float).tiny)
    tol = CHOL_TOL * scale
    if u == 0:
        if np.any(d <= tol):
            raise NotPositiveDefinite(f"pivot {d.min():.3e} at or below tolerance")
        return BandedMatrix(n, n, 0, 0, np.sqrt(d)[None, :])
    if u == 1:
        return _cholesky_tridiagonal(d.tolist(), A.diag(1).tolist(), tol)
    # general band: work on rows of R, R[i, i:i+u+1]
    R = np.zeros((n, u + 1))
    for i in range(n):
        w = min(u + 1, n - i)
        row = np.array([A.entry(i, i + k) for k in range(w)])
        for k in range(1, min(u, i) + 1):
            # contributions from row i-k of R: R[i-k, i : i-k+u+1]
            p = i - k
            ww = min(w, u + 1 - k)
            row[:ww] -= R[p, k] * R[p, k:k + ww]
        piv = row[0]
        if not piv > tol:
            raise NotPositiveDefinite(f"pivot {piv:.3e} at row {i} at or below tolerance")
        rii = math.sqrt(piv)
        R[i, 0] = rii
        R[i, 1:w] = row[1:w] / rii
    out = BandedMatrix(n, n, 0, u)
    for k in range(u + 1):
        out.set_diag(k, R[: n - k, k])
    return out


def _cholesky_tridiagonal(d, e, tol):
    n = len(d)
    rd = [0.0] * n
    re = [0.0] * max(n - 1, 0)
    prev = 0.0
    for i in range(n):
        piv = d[i] - prev * prev
        if not piv > tol:
            raise NotPositiveDefinite(f"pivot {piv:.3e} at row {i} at or below tolerance")
        r = math.sqrt(piv)
        rd[i] = r
        if i < n - 1:
            prev = e[i] / r
            re[i] = prev
    return BandedMatrix.from_diagonals({0: rd, 1: re}, n, n)


# ---------------------------------------------------------------------
# Householder QR
# ---------------------------------------------------------------------
@dataclass
class HouseholderQ:
    """Q = H_0 H_1 ... H_{n-1} diag(signs), H_j = I - tau_j v_j v_j^T.

    ``vectors[j]`` is supported on rows ``j .. j + len(vectors[j]) - 1`` and
    has leading entry 1.
    """
    n: int
    vectors: list
    taus: np.ndarray
    signs: np.ndarray
    _v1: list = field(default=None, repr=False)  # fast path: two-entry reflectors

    @property
    def window(self):
        return max((len(v) for v in self.vectors), default=1)

    def apply(self, x):
        """Q @ x."""
        x = np.array(x, dtype=float)
        if x.shape[0] != self.n:
            raise DimensionMismatch(f"Q is {self.n}x{self.n}, vector has {x.shape[0]} rows")
        x = (x.T * self.signs).T
        if self._v1 is not None and x.ndim == 1:
            return np.array(_apply_pairs(x.tolist(), self._v1, self.taus.tolist(), reverse=True))
        for j in range(self.n - 1, -1, -1):
            self._reflect(x, j)
        return x

    def apply_T(self, x):
        """Q^T @ x."""
        x = np.array(x, dtype=float)
        if x.shape[0] != self.n:
            raise DimensionMismatch(f"Q is {self.n}x{self.n}, vector has {x.shape[0]} rows")
        if self._v1 is not None and x.ndim == 1:
            y = np.array(_apply_pairs(x.tolist(), self._v1, self.taus.tolist(), reverse=False))
        else:
            y = x
            for j in range(self.n):
                self._reflect(y, j)
        return (y.T * self.signs).T

    def _reflect(self, x, j):
        tau = self.taus[j]
        if tau == 0.0:
            return
        v = self.vectors[j]
        sl = slice(j, j + len(v))
        w = v @ x[sl]
        x[sl] -= tau * np.multiply.outer(v, w) if x.ndim > 1 else tau * w * v

    def todense(self):
        return self.apply(np.eye(self.n))


def _apply_pairs(x, v1, tau, reverse):
    # two-entry reflectors on (j, j+1); plain floats are much faster than numpy here
    n = len(x)
    rng = range(n - 2, -1, -1) if reverse else range(n - 1)
    for j in rng:
        t = tau[j]
        if t != 0.0:
            a = v1[j]
            w = x[j] + a * x[j + 1]
            x[j] -= t * w
            x[j + 1] -= t * a * w
    return x


def _householder(x0, rest_norm2):
    """LAPACK dlarfg convention: returns (beta, tau, scale) with v = [1, rest/scale]."""
    if rest_norm2 == 0.0:
        return x0, 0.0, 1.0
    beta = -math.copysign(math.sqrt(x0 * x0 + rest_norm2), x0)
    tau = (beta - x0) / beta
    return beta, tau, x0 - beta


def banded_qr(A: BandedMatrix):
    """Positive-phase Householder QR of a banded matrix: A = Q R, diag(R) > 0."""
    if A.rows != A.cols:
        raise DimensionMismatch("banded_qr expects a square truncation")
    n, l, u = A.rows, A.lower_bw, A.upper_bw
    if n == 0:
        return HouseholderQ(0, [], np.zeros(0), np.zeros(0)), BandedMatrix(0, 0, 0, l + u)
    if l == 1 and u <= 1:
        Q, R = _qr_tridiagonal(A.diag(0).tolist(), A.diag(-1).tolist(),
                               A.diag(1).tolist() if u == 1 else [0.0] * (n - 1))
        return Q, (R if u == 1 else R.with_bandwidths(0, 1))
    ru = l + u
    # row-window storage: W[i, k] = A[i, i - l + k], width 2l + u + 1
    width = 2 * l + u + 1
    W = np.zeros((n, width))
    for k in range(-l, u + 1):
        dk = A.diag(k)
        j0 = max(0, k)
        idx = np.arange(j0, j0 + dk.shape[0])
        W[idx - k, l + k] = dk
    vectors, taus = [], np.zeros(n)
    Rdata = np.zeros((n, ru + 1))
    for j in range(n):
        r1 = min(n, j + l + 1)
        rows = np.arange(j, r1)
        col = W[rows, j - rows + l]
        beta, tau, scale = _householder(col[0], float(col[1:] @ col[1:]))
        if beta == 0.0 and tau == 0.0:
            raise RankDeficient(f"zero column norm at column {j}")
        v = np.ones(r1 - j)
        if tau != 0.0:
            v[1:] = col[1:] / scale
        vectors.append(v)
        taus[j] = tau
        c1 = min(n, j + ru + 1)
        cols = np.arange(j, c1)
        blk = W[rows[:, None], cols[None, :] - rows[:, None] + l]
        if tau != 0.0:
            blk -= tau * np.outer(v, v @ blk)
        blk[0, 0] = beta
        blk[1:, 0] = 0.0
        W[rows[:, None], cols[None, :] - rows[:, None] + l] = blk
        Rdata[j, : c1 - j] = blk[0]
    signs = np.where(Rdata[:, 0] < 0, -1.0, 1.0)
    if np.any(np.abs(Rdata[:, 0]) == 0.0):
        raise RankDeficient("zero diagonal in R")
    Rdata *= signs[:, None]
    R = BandedMatrix(n, n, 0, ru)
    for k in range(ru + 1):
        R.set_diag(k, Rdata[: n - k, k])
    return HouseholderQ(n, vectors, taus, signs), R


def _qr_tridiagonal(d, e, f):
    """QR of a tridiagonal matrix (sub e, super f) with two-entry reflectors."""
    n = len(d)
    r0 = [0.0] * n
    r1 = [0.0] * max(n - 1, 0)
    r2 = [0.0] * max(n - 2, 0)
    v1 = [0.0] * n
    tau = [0.0] * n
    a = d[0]                      # current (j, j)
    b = f[0] if n > 1 else 0.0    # current (j, j+1)
    c = 0.0                       # current (j, j+2), fill-in
    for j in range(n):
        if j < n - 1:
            x1 = e[j]
            beta, t, scale = _householder(a, x1 * x1)
            if beta == 0.0:
                raise RankDeficient(f"zero column norm at column {j}")
            vv = x1 / scale if t != 0.0 else 0.0
            # rows j, j+1; columns j+1 and j+2
            p1 = d[j + 1]
            p2 = f[j + 1] if j + 1 < n - 1 else 0.0
            w1 = b + vv * p1
            w2 = c + vv * p2
            r0[j] = beta
            r1[j] = b - t * w1
            if j < n - 2:
                r2[j] = c - t * w2
            a = p1 - t * vv * w1
            b = p2 - t * vv * w2
            c = 0.0
            v1[j] = vv
            tau[j] = t
        else:
            if a == 0.0:
                raise RankDeficient(f"zero column norm at column {j}")
            r0[j] = a
    signs = [(-1.0 if x < 0 else 1.0) for x in r0]
    r0 = [s * x for s, x in zip(signs, r0)]
    r1 = [signs[i] * r1[i] for i in range(n - 1)]
    r2 = [signs[i] * r2[i] for i in range(n - 2)]
    R = BandedMatrix.from_diagonals({0: r0, 1: r1, 2: r2}, n, n)
    vectors = [np.array([1.0, v1[j]]) for j in range(n - 1)] + [np.ones(1)]
    Q = HouseholderQ(n, vectors, np.array(tau), np.array(signs), _v1=v1)
    return Q, R


# ---------------------------------------------------------------------
# O(N) similarity transforms
# ---------------------------------------------------------------------
def _three_diagonals(R: BandedMatrix, n):
    r0 = R.diag(0)
    r1 = np.zeros(n)
    r2 = np.zeros(n)
    r1[: n - 1] = R.diag(1)[: n - 1] if R.upper_bw >= 1 else 0.0
    r2[: n - 2] = R.diag(2)[: n - 2] if R.upper_bw >= 2 else 0.0
    return r0, r1, r2


def similarity_via_R(X: BandedMatrix, R: BandedMatrix, symmetric=True) -> BandedMatrix:
    """Tridiagonal R X R^{-1} for tridiagonal X and upper-triangular R.

    Only three entries per row are formed, from M = R X, assuming the result
    is tridiagonal; the inverse of R is never built.  With ``symmetric`` the
    superdiagonal mirrors the subdiagonal (the Jacobi-matrix case); otherwise
    it is solved for from Y R = M as well.  The last
    two rows and columns of the result depend on entries beyond the
    truncation and should be discarded by callers that need exactness.
    """
    n = X.rows
    if X.cols != n or R.rows != n or R.cols != n:
        raise DimensionMismatch(f"X {X.shape}, R {R.shape}")
    r0, r1, r2 = _three_diagonals(R, n)
    scale = np.max(np.abs(r0)) if n else 1.0
    if n and np.min(np.abs(r0)) <= SINGULAR_TOL * scale:
        raise SingularR("R has a (numerically) zero diagonal entry")
    xd = X.diag(0)
    xs = np.zeros(n)
    xs[: n - 1] = X.diag(-1)
    xu = np.zeros(n)
    xu[: n - 1] = X.diag(1)
    # Y[i+1, i] = M[i+1, i] / R[i, i] with M[i+1, i] = R[i+1, i+1] X[i+1, i]
    sub = r0[1:] * xs[: n - 1] / r0[: n - 1]
    # Y[i, i] = (M[i, i] - Y[i, i-1] R[i-1, i]) / R[i, i]
    mii = r0 * xd + r1 * xs
    ysub_prev = np.zeros(n)
    ysub_prev[1:] = sub
    r1_prev = np.zeros(n)
    r1_prev[1:] = r1[: n - 1]
    diag = (mii - ysub_prev * r1_prev) / r0
    if symmetric:
        return tridiagonal(diag, sub)
    # Y[i, i+1] R[i+1, i+1] = M[i, i+1] - Y[i, i] R[i, i+1] - Y[i, i-1] R[i-1, i+1]
    i = np.arange(n - 1)
    xd1 = np.append(xd[1:], 0.0)
    xs1 = np.append(xs[1:], 0.0)
    m_up = r0[i] * xu[i] + r1[i] * xd1[i] + r2[i] * xs1[i]
    r2_prev = np.zeros(n)
    r2_prev[1:] = r2[: n - 1]
    sup = (m_up - diag[i] * r1[i] - ysub_prev[i] * r2_prev[i]) / r0[i + 1]
    return tridiagonal(diag, sup, sub)


def similarity_via_Q(X: BandedMatrix, Q: HouseholderQ) -> BandedMatrix:
    """Tridiagonal Q^T X Q, applying each reflector to a moving 4x4 window.

    After reflector j the leading j rows are final; only a single bulge
    entry beyond the tridiagonal band exists at any time.
    """
    n = X.rows
    if X.cols != n or Q.n != n:
        raise DimensionMismatch(f"X is {X.shape}, Q is {Q.n}x{Q.n}")
    if Q.window > 2:
        return _similarity_via_Q_dense_window(X, Q)
    d = X.diag(0).tolist()
    e = X.diag(1).tolist() + [0.0]
    bulge = 0.0  # W[j-1, j+1]
    v1 = Q._v1 if Q._v1 is not None else [float(v[1]) if len(v) > 1 else 0.0 for v in Q.vectors]
    taus = Q.taus.tolist()
    for j in range(n - 1):
        t = taus[j]
        if t == 0.0:
            bulge = 0.0
            continue
        a = v1[j]
        p, q = j, j + 1
        # rows/cols outside the pair: k = j-1 and k = j+2
        if j > 0:
            w = e[p - 1] + a * bulge
            e[p - 1] -= t * w
        if q + 1 < n:
            w = a * e[q]  # W[q+1, p] = 0
            new_bulge = -t * w
            e[q] = e[q] - t * a * w
        else:
            new_bulge = 0.0
        # central block B = [[dp, ep], [ep, dq]] -> H B H
        dp, ep, dq = d[p], e[p], d[q]
        # B H: columns mixed with w = B v
        w0 = dp + a * ep
        w1 = ep + a * dq
        b00 = dp - t * w0
        b01 = ep - t * w0 * a
        b10 = ep - t * w1
        b11 = dq - t * w1 * a
        # H (B H): rows mixed
        z0 = b00 + a * b10
        z1 = b01 + a * b11
        d[p] = b00 - t * z0
        e[p] = 0.5 * ((b01 - t * z1) + (b10 - t * a * z0))
        d[q] = b11 - t * a * z1
        bulge = new_bulge
    s = Q.signs
    off = np.array(e[: n - 1]) * s[: n - 1] * s[1:]
    return tridiagonal(np.array(d), off)


def _similarity_via_Q_dense_window(X, Q):
    # general reflector width: update the affected band window with dense blocks
    n = X.rows
    w = Q.window
    half = 2 * w
    W = np.zeros((n, 2 * half + 1))  # W[i, k] = X[i, i - half + k]
    for k in (-1, 0, 1):
        dk = X.diag(k)
        j0 = max(0, k)
        idx = np.arange(j0, j0 + dk.shape[0])
        W[idx - k, half + k] = dk
    for j in range(n):
        tau = Q.taus[j]
        if tau == 0.0:
            continue
        v = Q.vectors[j]
        rows = np.arange(j, j + len(v))
        lo, hi = max(0, j + len(v) - 1 - half), min(n, j + half + 1)
        cols = np.arange(lo, hi)
        blk = W[rows[:, None], cols[None, :] - rows[:, None] + half]
        blk -= tau * np.outer(v, v @ blk)
        W[rows[:, None], cols[None, :] - rows[:, None] + half] = blk
        blk = W[cols[:, None], rows[None, :] - cols[:, None] + half]
        blk -= tau * np.outer(blk @ v, v)
        W[cols[:, None], rows[None, :] - cols[:, None] + half] = blk
    s = Q.signs
    diag = W[:, half]
    off = W[: n - 1, half + 1] * s[: n - 1] * s[1:]
    return tridiagonal(diag, off)


# ---------------------------------------------------------------------
# triangular solves with a known result band
# ---------------------------------------------------------------------
def right_divide_known_band(M: BandedMatrix, R: BandedMatrix, lo: int, hi: int, n=None):
    """Y = M R^{-1} for upper-triangular R when Y[i, i+d] = 0 outside lo <= d <= hi.

    Row i of Y is found from columns i+lo .. i+hi of M by forward
    substitution, so the cost is O(N (hi-lo+1) (upper_bw(R)+1)).
    """
    n = M.rows if n is None else n
    width = hi - lo + 1
    Y = np.zeros((n, width))
    i = np.arange(n)
    for a in range(width):
        d = lo + a
        cols = i + d
        ok = (cols >= 0) & (cols < min(M.cols, R.rows))
        rhs = np.zeros(n)
        rhs[ok] = _band_gather(M, i[ok], cols[ok])
        for b in range(a):
            kcol = i + lo + b
            ok2 = ok & (kcol >= 0)
            rhs[ok2] -= Y[ok2, b] * _band_gather(R, kcol[ok2], cols[ok2])
        diag = np.zeros(n)
        diag[ok] = _band_gather(R, cols[ok], cols[ok])
        good = ok & (diag != 0)
        Y[good, a] = rhs[good] / diag[good]
    out = BandedMatrix(n, n, max(0, -lo), max(0, hi))
    for a in range(width):
        d = lo + a
        vals = Y[:, a]
        if d >= 0:
            out.set_diag(d, vals[: max(0, n - d)])
        else:
            out.set_diag(d, vals[-d:])
    return out


def left_divide_known_band(R: BandedMatrix, M: BandedMatrix, lo: int, hi: int, n=None):
    """Y = R^{-1} M for upper-triangular R when Y[j+d, j] = 0 outside lo <= d <= hi.

    Column j of Y is found by back substitution over rows j+hi .. j+lo of M.
    ``lo``/``hi`` are row offsets relative to the column (positive = below).
    """
    n = M.cols if n is None else n
    width = hi - lo + 1
    Y = np.zeros((n, width))  # Y[j, a] = Y[j + hi - a, j]
    j = np.arange(n)
    for a in range(width):
        d = hi - a
        rows = j + d
        ok = (rows >= 0) & (rows < min(M.rows, R.rows))
        rhs = np.zeros(n)
        rhs[ok] = _band_gather(M, rows[ok], j[ok])
        for b in range(a):
            krow = j + hi - b
            ok2 = ok & (krow < R.cols)
            rhs[ok2] -= _band_gather(R, rows[ok2], krow[ok2]) * Y[ok2, b]
        diag = np.zeros(n)
        diag[ok] = _band_gather(R, rows[ok], rows[ok])
        good = ok & (diag != 0)
        Y[good, a] = rhs[good] / diag[good]
    out = BandedMatrix(n, n, max(0, hi), max(0, -lo))
    for a in range(width):
        d = hi - a  # entry (j+d, j): diagonal offset -d
        vals = Y[:, a]
        if d >= 0:
            out.set_diag(-d, vals[: max(0, n - d)])
        else:
            out.set_diag(-d, vals[-d:])
    return out


def _band_gather(B: BandedMatrix, i, j):
    i = np.asarray(i)
    j = np.asarray(j)
    out = np.zeros(i.shape)
    inside = (j - i <= B.upper_bw) & (i - j <= B.lower_bw) & (i < B.rows) & (j < B.cols) & (i >= 0) & (j >= 0)
    out[inside] = B.data[B.upper_bw + i[inside] - j[inside], j[inside]]
    return out


# ---------------------------------------------------------------------
# bordered (almost-banded) systems
# ---------------------------------------------------------------------
@dataclass
class BorderedSystem:
    """Square system [[top_rows], [core | extra_cols]].

    ``top_rows`` is r x n, ``core`` is p x q banded, ``extra_cols`` is p x s,
    with r + p = q + s = n.
    """
    core: BandedMatrix
    top_rows: np.ndarray
    extra_cols: np.ndarray = None

    def __post_init__(self):
        p = self.core.rows
        self.top_rows = np.atleast_2d(np.asarray(self.top_rows, dtype=float))
        if self.top_rows.size == 0:
            self.top_rows = np.zeros((0, self.core.cols + self.n_extra))
        if self.extra_cols is None:
            self.extra_cols = np.zeros((p, 0))
        self.extra_cols = np.asarray(self.extra_cols, dtype=float).reshape(p, -1)
        n = self.core.cols + self.extra_cols.shape[1]
        if self.top_rows.shape[1] != n or self.top_rows.shape[0] + p != n:
            raise DimensionMismatch(
                f"top rows {self.top_rows.shape}, core {self.core.shape}, "
                f"extra cols {self.extra_cols.shape} do not assemble to a square system")

    @property
    def n_extra(self):
        return 0 if self.extra_cols is None else np.asarray(self.extra_cols).reshape(self.core.rows, -1).shape[1]

    @property
    def size(self):
        return self.top_rows.shape[1]

    def tosparse(self):
        body = sp.hstack([self.core.tosparse(), sp.csr_matrix(self.extra_cols)])
        return sp.vstack([sp.csr_matrix(self.top_rows), body]).tocsr()

    def todense(self):
        return self.tosparse().toarray()


DENSE_CUTOFF = 64


def bordered_solve(S: BorderedSystem, rhs) -> np.ndarray:
    """Solve an almost-banded system.

    Below DENSE_CUTOFF unknowns a dense LU is used.  Otherwise the trailing
    square block of [core | extra_cols] is factored as a band and the r
    leading unknowns are found from an r x r Schur complement.  A residual
    check guards the elimination; on failure the sparse LU is used.
    """
    b = np.asarray(rhs, dtype=float)
    n = S.size
    if b.shape[0] != n:
        raise DimensionMismatch(f"system has {n} rows, rhs has {b.shape[0]}")
    if n == 0:
        return np.zeros(0)
    if n < DENSE_CUTOFF:
        return _dense_solve(S.todense(), b)
    x = _schur_solve(S, b)
    A = S.tosparse()
    bnorm = np.max(np.abs(b)) if b.size else 0.0
    anorm = abs(A).sum(axis=1).max()
    if x is not None and np.all(np.isfinite(x)):
        res = np.max(np.abs(A @ x - b))
        if res <= 1e-10 * (1.0 + bnorm + anorm * np.max(np.abs(x))):
            return x
    import scipy.sparse.linalg as spla
    try:
        x = spla.spsolve(A.tocsc(), b)
    except RuntimeError as exc:  # pragma: no cover - SuperLU raises on exact singularity
        raise SingularSystem(str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise SingularSystem("sparse LU produced non-finite values")
    return x


def _dense_solve(A, b):
    try:
        with warnings.catch_warnings():
            # exact singularity is reported below as SingularSystem
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            lu, piv = sla.lu_factor(A, check_finite=True)
    except (ValueError, sla.LinAlgError) as exc:
        raise SingularSystem(str(exc)) from exc
    if np.any(np.diag(lu) == 0):
        raise SingularSystem("exactly singular matrix")
    x = sla.lu_solve((lu, piv), b)
    if not np.all(np.isfinite(x)):
        raise SingularSystem("dense LU produced non-finite values")
    return x


def _schur_solve(S, b):
    r = S.top_rows.shape[0]
    K = sp.hstack([S.core.tosparse(), sp.csr_matrix(S.extra_cols)]).tocsc()
    K1 = K[:, :r].toarray()
    K2 = K[:, r:]
    coo = K2.tocoo()
    if coo.nnz == 0:
        return None
    lo = int(max(0, (coo.row - coo.col).max()))
    up = int(max(0, (coo.col - coo.row).max()))
    p = K2.shape[0]
    ab = np.zeros((lo + up + 1, p))
    ab[up + coo.row - coo.col, coo.col] = coo.data
    T1 = S.top_rows[:, :r]
    T2 = S.top_rows[:, r:]
    rhs = np.column_stack([b[r:], K1])
    try:
        sol = sla.solve_banded((lo, up), ab, rhs, check_finite=False)
    except (ValueError, sla.LinAlgError):
        return None
    y0, Y = sol[:, 0], sol[:, 1:]
    schur = T1 - T2 @ Y
    try:
        x1 = np.linalg.solve(schur, b[:r] - T2 @ y0)
    except np.linalg.LinAlgError:
        return None
    x2 = y0 - Y @ x1
    return np.concatenate([x1, x2])
