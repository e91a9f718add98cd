"""Semiclassical Jacobi families on (0, 1) orthonormal for
x^a (1-x)^b (t-x)^c: Jacobi matrices, connection and differentiation
matrices, and conversion to Chebyshev coefficients.

Families with ``t=None`` are the classical ones (weight x^a (1-x)^b, c = 0);
in that case the c parameter never participates in any operator.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .banded import (BandedMatrix, banded_cholesky, banded_qr, left_divide_known_band,
                     right_divide_known_band, shifted_identity_minus, similarity_via_Q,
                     similarity_via_R)
from .classical import (clenshaw_eval, conversion_T_to_jacobi, eval_all,
                        jacobi_derivative, shifted_jacobi)
from .errors import InvalidParameter

STRATEGIES = ("CholeskyR", "QR_Q", "QR_R")
DEFAULT_STRATEGY = "QR_Q"
SIGN = {"a": 1.0, "b": -1.0, "c": -1.0}


class Hierarchy:
    """Jacobi matrices X_c for c = 0, 1, 2, ... at fixed (t, a, b).

    Each X_c is a principal truncation that is exact entry by entry; the
    chain is rebuilt with a larger base size when a request exceeds the
    stored capacity.  Inserts are serialized by a lock.
    """

    def __init__(self, t, a, b, strategy=DEFAULT_STRATEGY):
        if strategy not in STRATEGIES:
            raise InvalidParameter(f"unknown strategy {strategy!r}")
        if t is not None and not t > 1:
            raise InvalidParameter(f"t must exceed 1, got {t}")
        if a <= -1 or b <= -1:
            raise InvalidParameter(f"a, b must exceed -1, got ({a}, {b})")
        self.t, self.a, self.b, self.strategy = t, a, b, strategy
        self.base = 0
        self.X = []
        self.norm0 = []
        self._qr = {}        # c -> (Q, R) of tI - X_c, at the capacity of X_c
        self._dup = {}       # c -> diff_up matrix
        self._lock = threading.RLock()

    def trim(self, c):
        if self.strategy == "CholeskyR":
            return 2 * c
        return c + c % 2

    def capacity(self, c):
        return self.X[c].rows if c < len(self.X) else self.base - self.trim(c)

    def ensure(self, c, N):
        if self.t is None and c != 0:
            raise InvalidParameter("classical families have c = 0")
        with self._lock:
            if c < len(self.X) and self.X[c].rows >= N:
                return
            if self.base - self.trim(c) < N:
                cmax = max(c, len(self.X) - 1)
                need = max(N + self.trim(c), max((self.X[k].rows + self.trim(k) for k in range(len(self.X))), default=0))
                self._rebuild(max(need + 4, int(1.25 * self.base)), cmax)
            else:
                self._extend(c)

    def _rebuild(self, base, cmax):
        self.base = base
        fam = shifted_jacobi(self.a, self.b)
        self.X = [fam.jacobi_matrix(base)]
        self.norm0 = [fam.p0]
        self._qr.clear()
        self._dup.clear()
        self._extend(cmax)

    def _extend(self, c):
        while len(self.X) <= c:
            k = len(self.X)
            if self.strategy == "CholeskyR" or k % 2 == 1:
                Xp = self.X[k - 1]
                R = banded_cholesky(shifted_identity_minus(Xp, self.t))
                Y = similarity_via_R(Xp, R)
                self.norm0.append(self.norm0[k - 1] / R.entry(0, 0))
            else:
                Xp = self.X[k - 2]
                Q, R = self.qr_factor(k - 2)
                Y = similarity_via_Q(Xp, Q) if self.strategy == "QR_Q" else similarity_via_R(Xp, R)
                self.norm0.append(self.norm0[k - 2] / R.entry(0, 0))
            n = Y.rows - 2
            self.X.append(Y.truncate(n))

    def qr_factor(self, c):
        """Positive-phase QR of tI - X_c; (t-x) Q^{c+2} = Q^{c} Q."""
        with self._lock:
            if c not in self._qr:
                self._qr[c] = banded_qr(shifted_identity_minus(self.X[c], self.t))
            return self._qr[c]


_CACHE: dict = {}
_CACHE_LOCK = threading.Lock()


def hierarchy(t, a, b, strategy=DEFAULT_STRATEGY) -> Hierarchy:
    key = (None if t is None else float(t), float(a), float(b), strategy)
    with _CACHE_LOCK:
        h = _CACHE.get(key)
        if h is None:
            h = _CACHE[key] = Hierarchy(*key)
        return h


def clear_cache():
    with _CACHE_LOCK:
        _CACHE.clear()


@dataclass(frozen=True)
class SemiclassicalFamily:
    """Handle for Q^{t,(a,b,c)}; the Jacobi matrix lives in the hierarchy cache."""
    t: float | None
    a: float
    b: float
    c: int = 0
    strategy: str = DEFAULT_STRATEGY

    def __post_init__(self):
        if self.c < 0 or int(self.c) != self.c:
            raise InvalidParameter(f"c must be a nonnegative integer, got {self.c}")
        if self.t is None and self.c != 0:
            raise InvalidParameter("classical families have c = 0")

    @property
    def classical(self):
        return self.t is None

    @property
    def hierarchy(self):
        return hierarchy(self.t, self.a, self.b, self.strategy)

    def params(self):
        return {"a": self.a, "b": self.b, "c": self.c}

    def shifted(self, **delta):
        p = self.params()
        for k, v in delta.items():
            p[k] = p[k] + v
        return SemiclassicalFamily(self.t, p["a"], p["b"], int(p["c"]), self.strategy)

    def ensure(self, N):
        self.hierarchy.ensure(self.c, N)
        return self

    def jacobi_matrix(self, N):
        h = self.hierarchy
        h.ensure(self.c, N)
        return h.X[self.c].truncate(N)

    @property
    def norm0(self):
        h = self.hierarchy
        h.ensure(self.c, 1)
        return h.norm0[self.c]

    def weight(self, x):
        x = np.asarray(x, dtype=float)
        w = x**self.a * (1 - x) ** self.b
        if not self.classical:
            w = w * (self.t - x) ** self.c
        return w

    def phi(self, which, X):
        """phi_which(X) for phi_a = x, phi_b = 1-x, phi_c = t-x."""
        if which == "a":
            return X
        if which == "b":
            return shifted_identity_minus(X, 1.0)
        return shifted_identity_minus(X, self.t)

    def eval(self, n, x):
        """Q_0 .. Q_{n-1} at x, shape (len(x), n)."""
        return eval_all(self.jacobi_matrix(n + 1), self.norm0, n, x)

    def clenshaw(self, coeffs, x):
        c = np.asarray(coeffs, dtype=float)
        return clenshaw_eval(self.jacobi_matrix(c.shape[0] + 1), c, x, p0=self.norm0)

    def __repr__(self):
        tag = "classical" if self.classical else f"t={self.t:g}"
        return f"SemiclassicalFamily({tag}, a={self.a:g}, b={self.b:g}, c={self.c})"


def semiclassical_jacobi(t, a, b, c, N, strategy=DEFAULT_STRATEGY) -> SemiclassicalFamily:
    """Family handle whose N x N Jacobi matrix is available."""
    return SemiclassicalFamily(t, a, b, int(c), strategy).ensure(N)


def _family_keys(fam):
    return ("a", "b") if fam.classical else ("a", "b", "c")


# ---------------------------------------------------------------------
# connection matrices
# ---------------------------------------------------------------------
def unit_raise(fam: SemiclassicalFamily, which: str, N: int) -> BandedMatrix:
    """R with Q^{fam} = Q^{fam + e_which} R: Cholesky of phi_which(X)."""
    if fam.classical and which == "c":
        raise InvalidParameter("cannot raise c of a classical family")
    X = fam.jacobi_matrix(N)
    return banded_cholesky(fam.phi(which, X))


def raise_c_connection(fam: SemiclassicalFamily, dc: int, N: int) -> BandedMatrix:
    """Q^{(a,b,c)} = Q^{(a,b,c+dc)} R, chained through unit Cholesky steps."""
    if dc < 1:
        raise InvalidParameter("dc must be at least 1")
    R = unit_raise(fam, "c", N)
    for k in range(1, dc):
        R = unit_raise(fam.shifted(c=k), "c", N) @ R
    return R.with_bandwidths(0, dc)


def _weight_matrix(fam, deltas, N):
    """prod phi_s(X)^deltas[s] at N x N (computed at a padded size)."""
    deg = sum(deltas.values())
    X = fam.jacobi_matrix(N + deg)
    M = BandedMatrix.identity(N + deg)
    for s, k in deltas.items():
        P = fam.phi(s, X)
        for _ in range(k):
            M = M @ P
    return M.truncate(N).with_bandwidths(deg, deg)


def general_raise_connection(fam: SemiclassicalFamily, da=0, db=0, dc=0, N=None) -> BandedMatrix:
    """Q^{(a,b,c)} = Q^{(a+da,b+db,c+dc)} R with upper bandwidth da+db+dc.

    Cholesky of x^da (1-x)^db (t-x)^dc evaluated at the Jacobi matrix; if that
    product is numerically indefinite the raise is split into unit steps.
    """
    from .errors import NotPositiveDefinite
    deltas = {k: int(v) for k, v in (("a", da), ("b", db), ("c", dc)) if v}
    deg = sum(deltas.values())
    if deg < 1 or any(v < 0 for v in deltas.values()):
        raise InvalidParameter("raise increments must be nonnegative with a positive sum")
    if fam.classical and "c" in deltas:
        raise InvalidParameter("cannot raise c of a classical family")
    if deg == 1:
        return unit_raise(fam, next(iter(deltas)), N)
    try:
        return banded_cholesky(_weight_matrix(fam, deltas, N))
    except NotPositiveDefinite:
        pass
    R = None
    cur = fam
    for s, k in deltas.items():
        for _ in range(k):
            step = unit_raise(cur, s, N)
            R = step if R is None else step @ R
            cur = cur.shifted(**{s: 1})
    return R.with_bandwidths(0, deg)


def weighted_lowering(fam: SemiclassicalFamily, which, N: int) -> BandedMatrix:
    """L with w(x) Q^{fam}(x) = Q^{fam - which}(x) L, w = prod over ``which`` of
    x, 1-x, t-x.  Equal to the transpose of the matching raise."""
    which = tuple(sorted(set(which)))
    low = fam.shifted(**{s: -1 for s in which})
    if low.a <= -1 or low.b <= -1:
        raise InvalidParameter(f"lowered parameters ({low.a}, {low.b}) must exceed -1")
    deltas = {f"d{s}": 1 for s in which}
    return general_raise_connection(low, N=N, **deltas).T


# ---------------------------------------------------------------------
# differentiation
# ---------------------------------------------------------------------
def diff_up(fam: SemiclassicalFamily, N: int) -> BandedMatrix:
    """D with d/dx Q^{(a,b,c)} = Q^{(a+1,b+1,c+1)} D (c stays 0 when classical).

    Built from the classical derivative at c = 0 and the recursion
    D_{c+1} = R_up D_c R_low^{-1}, where R_low raises (a,b,c) -> (a,b,c+1)
    and R_up raises (a+1,b+1,c+1) -> (a+1,b+1,c+2); only superdiagonals
    1 and 2 of each product are formed.
    """
    if fam.classical:
        return jacobi_derivative(fam.a, fam.b, N)
    h = fam.hierarchy
    up = SemiclassicalFamily(fam.t, fam.a + 1, fam.b + 1, 0, fam.strategy)
    with h._lock:
        cached = h._dup.get(fam.c)
        if cached is not None and cached.rows >= N:
            return cached.truncate(N)
        # restart from the deepest cached c with enough rows
        start = max([k for k, D in h._dup.items() if k <= fam.c and D.rows >= N], default=None)
        if start is None:
            D = unit_raise(up, "c", N) @ jacobi_derivative(fam.a, fam.b, N)
            D = D.with_bandwidths(0, 2)
            start = 0
            h._dup[0] = D
        else:
            D = h._dup[start].truncate(N)
        for k in range(start, fam.c):
            M = unit_raise(up.shifted(c=k + 1), "c", N) @ D
            R_low = unit_raise(fam.shifted(c=k - fam.c), "c", N)
            D = right_divide_known_band(M, R_low, 1, 2)
            h._dup[k + 1] = D
        return D


def diff_weighted(fam: SemiclassicalFamily, which, N: int) -> BandedMatrix:
    """D_S for the weighted derivative over the weight subset S = ``which``:

        d/dx [w_S^{p} Q^{p}] = w_S^{p-1} Q^{target} D_S,

    with w_S^{p} = prod_{s in S} phi_s^{p_s}; target parameters are p-1 on S
    and p+1 off S.  Using Q' = Q^{p+1} D_up and Q^{p} = Q^{mid} R_comp
    (mid = p on S, p+1 off S),

        w_S^{1-p} d/dx[...] = Q^{mid} (L_S D_up + sum_s p_s phi_s' prod_{S\\s} phi(X_mid) R_comp),

    and Q^{mid} = Q^{target} R_S^{-1}.  Column j of D_S has nonzeros only in
    rows j+|S|-2 and j+|S|-1, so the final left division touches two
    entries per column.
    """
    S = tuple(s for s in ("a", "b", "c") if s in set(which))
    if not S:
        return diff_up(fam, N)
    if fam.classical and "c" in S:
        raise InvalidParameter("classical families carry no c weight")
    p = fam.params()
    for s in S:
        if s in ("a", "b") and p[s] - 1 <= -1:
            raise InvalidParameter(f"target parameter {s}={p[s] - 1} must exceed -1")
        if s == "c" and p[s] < 1:
            raise InvalidParameter("weighted c-derivative needs c >= 1")
    comp = tuple(s for s in _family_keys(fam) if s not in S)
    Nb = N + 4
    mid = fam.shifted(**{s: 1 for s in comp})
    target = fam.shifted(**{s: -1 for s in S}, **{s: 1 for s in comp})

    D_up = diff_up(fam, Nb + 2)
    L_S = general_raise_connection(mid, N=Nb + 2, **{f"d{s}": 1 for s in S}).T
    M = (L_S @ D_up).truncate(Nb)
    R_comp = (general_raise_connection(fam, N=Nb + 4, **{f"d{s}": 1 for s in comp})
              if comp else BandedMatrix.identity(Nb + 4))
    Xmid = mid.jacobi_matrix(Nb + 4)
    for s in S:
        coef = p[s] * SIGN[s]
        if coef == 0:
            continue
        P = BandedMatrix.identity(Nb + 4) * coef
        for r in S:
            if r != s:
                P = P @ mid.phi(r, Xmid)
        M = M + (P @ R_comp).truncate(Nb)
    R_S = general_raise_connection(target, N=Nb, **{f"d{s}": 1 for s in S})
    k = len(S)
    D = left_divide_known_band(R_S, M, k - 2, k - 1)
    return D.truncate(N)


# ---------------------------------------------------------------------
# conversion to Chebyshev coefficients
# ---------------------------------------------------------------------
def to_chebyshev_coeffs(fam: SemiclassicalFamily, weight_power, coeffs):
    """Chebyshev coefficients h in the variable 1-2x of an expansion in fam.

    ``weight_power="none"``: sum f_n Q_n(x) = T(1-2x) h.
    ``weight_power="half_c"``: (t-x)^{c/2} sum f_n Q_n(x) = (t-x)^{e} T(1-2x) h,
    with e = 0 for even c and e = 1/2 for odd c; returns (h, e).

    The unweighted route applies unit Cholesky inverses down to c = 0; the
    weighted route applies c/2 orthogonal factors (t-x) Q^{c+2} = Q^{c} Q_c,
    preceded by one Cholesky inverse when c is odd.  Both end with the
    classical Chebyshev conversion, so a and b must be nonnegative integers.
    """
    f = np.asarray(coeffs, dtype=float)
    N = f.shape[0]
    c = fam.c
    if weight_power == "none":
        g = f.copy()
        for k in range(c - 1, -1, -1):
            R = unit_raise(fam.shifted(c=k - c), "c", g.shape[0])
            g = _upper_solve(R, g)
        return _classical_to_cheb(fam.a, fam.b, g)
    if weight_power != "half_c":
        raise InvalidParameter(f"unknown weight_power {weight_power!r}")
    g = f.copy()
    tag = 0.0
    if c % 2 == 1:
        R = unit_raise(fam.shifted(c=-1), "c", N)
        g = _upper_solve(R, g)
        c -= 1
        tag = 0.5
    h = fam.hierarchy
    L = N + c // 2
    h.ensure(c, L + 2)
    for k in range(c - 2, -2, -2):
        Q, _ = h.qr_factor(k)
        v = np.zeros(Q.n)
        v[: g.shape[0]] = g
        g = Q.apply(v)[: min(Q.n, g.shape[0] + 1)]
    return _classical_to_cheb(fam.a, fam.b, g), tag


def from_chebyshev_coeffs(fam: SemiclassicalFamily, weight_power, cheb, N):
    """Inverse of :func:`to_chebyshev_coeffs`, returning N coefficients."""
    cheb = np.asarray(cheb, dtype=float)
    c = fam.c
    if weight_power == "none":
        g = _cheb_to_classical(fam.a, fam.b, cheb[:N] if cheb.shape[0] >= N else np.pad(cheb, (0, N - cheb.shape[0])))
        for k in range(c):
            R = unit_raise(fam.shifted(c=k - c), "c", N)
            g = R @ g
        return g
    if weight_power != "half_c":
        raise InvalidParameter(f"unknown weight_power {weight_power!r}")
    odd = c % 2
    ce = c - odd
    L = N + ce // 2
    h = fam.hierarchy
    h.ensure(ce, L + 2)
    g = _cheb_to_classical(fam.a, fam.b, cheb[:L] if cheb.shape[0] >= L else np.pad(cheb, (0, L - cheb.shape[0])))
    for k in range(0, ce, 2):
        Q, _ = h.qr_factor(k)
        v = np.zeros(Q.n)
        v[: g.shape[0]] = g
        g = Q.apply_T(v)[: g.shape[0] - 1]
    g = g[:N]
    if odd:
        R = unit_raise(fam.shifted(c=-1), "c", N)
        g = R @ g
    return g


def _upper_solve(R: BandedMatrix, g):
    from scipy.linalg import solve_banded
    u = R.upper_bw
    return solve_banded((0, u), R.data, g)


def _classical_to_cheb(a, b, g):
    RT, s = conversion_T_to_jacobi(a, b, g.shape[0])
    return RT @ (s * g)


def _cheb_to_classical(a, b, h):
    from scipy.linalg import solve_triangular
    RT, s = conversion_T_to_jacobi(a, b, h.shape[0])
    return solve_triangular(RT.todense(), h) / s
