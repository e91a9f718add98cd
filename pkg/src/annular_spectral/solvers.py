"""Helmholtz solvers  Delta u + lam u = f,  u = 0 on the boundary.

* :func:`solve_zernike_annular`: weighted Zernike annular basis, one tridiagonal
  (Poisson) or pentadiagonal (Helmholtz) solve per Fourier mode.
* :func:`solve_zernike_annular_ncc`: the same with lam(r^2) given by Chebyshev
  coefficients on r^2 in [rho^2, 1].
* :func:`solve_chebfourier`: scaled-and-shifted Chebyshev-Fourier series.
* :func:`solve_spectral_element`: disk and/or annulus cells joined by
  continuity rows with tau corrections.
* :func:`solve_zernike_disk`: weighted Zernike basis on the disk.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solve_banded
from numpy.polynomial.chebyshev import chebvander

from .annulus import (AnnulusGrid, AnnulusParams, DiskMode, ModeCoefficients,
                      analysis, column_index, disk_analysis, disk_polar_values,
                      disk_weighted_laplacian, disk_weighted_lowering,
                      laplacian_W, laplacian_Z, lowering_weighted, mode_columns,
                      mode_size, mult_r2, polar_values, radial_derivatives,
                      radial_values, trig_rows)
from .banded import BandedMatrix, BorderedSystem, bordered_solve
from .chebfourier import (ChebFourierBasis, cf_assemble, cf_expand, cf_rhs)
from .errors import InvalidParameter, MeshError, SingularSystem
from .semiclassical import general_raise_connection


def tau_continuity_scale(m):
    """Weight of the tau unknown in the continuity row of mode m."""
    return 1.0 - math.exp(-(m + 1))


def _map_modes(fn, items, workers):
    if workers is None or workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _polar_mesh(r, theta):
    r = np.atleast_1d(np.asarray(r, dtype=float))
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    return r[:, None] * np.cos(theta)[None, :], r[:, None] * np.sin(theta)[None, :]


def _solve_banded_matrix(A: BandedMatrix, b, m):
    try:
        with np.errstate(divide="ignore", invalid="ignore"):
            x = solve_banded((A.lower_bw, A.upper_bw), A.data, b, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"mode m={m}: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise SingularSystem(f"mode m={m}: non-finite solution")
    return x


# ---------------------------------------------------------------------
# weighted Zernike annular
# ---------------------------------------------------------------------
@dataclass
class ZernikeAnnularSolution:
    """u = W^{(1,1)} coefficients, W = (1 - r^2)(r^2 - rho^2) Z^{(1,1)}."""
    params: AnnulusParams
    coeffs: ModeCoefficients

    @property
    def N(self):
        return self.coeffs.N

    @property
    def ndofs(self):
        return self.coeffs.ndofs

    def polar_values(self, r, theta):
        return polar_values(self.params, self.coeffs, r, theta, weighted=True)

    def __call__(self, x, y):
        from .annulus import evaluate
        return evaluate(self.params, self.coeffs, x, y, weighted=True)


def za_mode_matrix(params: AnnulusParams, m, k, lam=0.0) -> BandedMatrix:
    """k x k matrix of Delta + lam from W^{(1,1)}_m to Z^{(1,1)}_m."""
    A = laplacian_W(params, m, k)
    if lam != 0.0:
        A = A.with_bandwidths(2, 2) + lowering_weighted(params, m, k) * float(lam)
    return A


def ncc_operator(params: AnnulusParams, m, k, lam_cheb) -> BandedMatrix:
    """k x k matrix Lambda_m with lam(r^2) Z^{(1,1)}_m = Z^{(1,1)}_m Lambda_m, where
    lam(r^2) = sum_n lam_n T_n(s), s the affine map of [rho^2, 1] onto [-1, 1].
    Evaluated by Clenshaw's recurrence on the matrix argument."""
    c = np.atleast_1d(np.asarray(lam_cheb, dtype=float))
    deg = c.shape[0] - 1
    size = k + deg + 1
    rho2 = params.rho**2
    M = mult_r2(params, m, size).tosparse()
    I = sp.identity(size, format="csr")
    B = (2.0 * M - (1.0 + rho2) * I) / (1.0 - rho2)
    b1 = sp.csr_matrix((size, size))
    b2 = sp.csr_matrix((size, size))
    for n in range(deg, 0, -1):
        b1, b2 = c[n] * I + 2.0 * (B @ b1) - b2, b1
    out = c[0] * I + B @ b1 - b2
    return BandedMatrix.from_sparse(out.tocsr()[:k, :k], deg, deg)


def za_mode_matrix_ncc(params: AnnulusParams, m, k, lam_cheb) -> BandedMatrix:
    c = np.atleast_1d(np.asarray(lam_cheb, dtype=float))
    if c.shape[0] == 1:
        return za_mode_matrix(params, m, k, float(c[0]))
    deg = c.shape[0] - 1
    Lam = ncc_operator(params, m, k + 2, c)
    L = lowering_weighted(params, m, k + 2)
    A = laplacian_W(params, m, k).with_bandwidths(deg + 2, deg + 2)
    return A + (Lam @ L).truncate(k).with_bandwidths(deg + 2, deg + 2)


def _za_rhs(params, f, N):
    if isinstance(f, ModeCoefficients):
        return f.pad(N) if f.N < N else f
    grid = AnnulusGrid(params.rho, N)
    x, y = grid.points()
    vals = np.asarray(f(x, y), dtype=float) * np.ones_like(x)
    return analysis(params, vals, N)


def _solve_za(rho, f, N, build, workers):
    params = AnnulusParams(rho, 1, 1)
    F = _za_rhs(params, f, N)
    out = ModeCoefficients(N)

    def one(m):
        k = mode_size(N, m)
        A = build(params, m, k)
        res = []
        for j in ((1,) if m == 0 else (0, 1)):
            b = F.mode(m, j)
            res.append((j, _solve_banded_matrix(A, b, m) if np.any(b) else np.zeros(k)))
        return m, res

    for m, res in _map_modes(one, range(N + 1), workers):
        for j, u in res:
            out.set_mode(m, j, u)
    return ZernikeAnnularSolution(params, out)


def solve_zernike_annular(rho, f, N, lam=0.0, workers=1) -> ZernikeAnnularSolution:
    """Weighted Zernike annular solve at degree N with constant lam.

    ``f`` is a callable f(x, y) or the Z^{(1,1)} coefficients of the data.
    """
    lam = float(lam)
    return _solve_za(rho, f, N, lambda p, m, k: za_mode_matrix(p, m, k, lam), workers)


def solve_zernike_annular_ncc(rho, f, N, lam_cheb, workers=1) -> ZernikeAnnularSolution:
    """Weighted Zernike annular solve with lam given as Chebyshev coefficients in
    r^2 on [rho^2, 1]; a single coefficient reduces to the constant solver."""
    c = np.atleast_1d(np.asarray(lam_cheb, dtype=float))
    return _solve_za(rho, f, N, lambda p, m, k: za_mode_matrix_ncc(p, m, k, c), workers)


def lam_r2_chebyshev(rho, poly_r2):
    """Chebyshev coefficients on [rho^2, 1] of lam = sum_k poly_r2[k] (r^2)^k."""
    p = np.polynomial.Polynomial(np.asarray(poly_r2, dtype=float))
    rho2 = rho * rho
    # r^2 = ((1 + rho^2) + (1 - rho^2) s) / 2
    q = p(np.polynomial.Polynomial([(1 + rho2) / 2, (1 - rho2) / 2]))
    return np.polynomial.chebyshev.poly2cheb(q.coef)


# ---------------------------------------------------------------------
# weighted Zernike disk
# ---------------------------------------------------------------------
@dataclass
class ZernikeDiskSolution:
    """u = (1 - r^2) Z^{(1)} coefficients on the disk of the given radius."""
    coeffs: ModeCoefficients
    radius: float = 1.0

    @property
    def ndofs(self):
        return self.coeffs.ndofs

    def polar_values(self, r, theta):
        return disk_polar_values(1, self.coeffs, r, theta, self.radius, weighted=True)


def solve_zernike_disk(f, N, lam=0.0, workers=1) -> ZernikeDiskSolution:
    F = f if isinstance(f, ModeCoefficients) else disk_analysis(f, N, 1)
    out = ModeCoefficients(N)
    lam = float(lam)

    def one(m):
        k = mode_size(N, m)
        A = disk_weighted_laplacian(m, k)
        if lam != 0.0:
            A = A.with_bandwidths(1, 1) + disk_weighted_lowering(m, k) * lam
        return m, [(j, _solve_banded_matrix(A, F.mode(m, j), m))
                   for j in ((1,) if m == 0 else (0, 1))]

    for m, res in _map_modes(one, range(N + 1), workers):
        for j, u in res:
            out.set_mode(m, j, u)
    return ZernikeDiskSolution(out)


# ---------------------------------------------------------------------
# Chebyshev-Fourier
# ---------------------------------------------------------------------
@dataclass
class ChebFourierSolution:
    """T(s) x Fourier coefficients, (N + 2) x (2N + 1)."""
    basis: ChebFourierBasis
    U: np.ndarray

    @property
    def N(self):
        return self.basis.N

    @property
    def ndofs(self):
        return self.basis.ndofs

    def polar_values(self, r, theta):
        s = self.basis.to_s(np.atleast_1d(r))
        G = chebvander(s, self.U.shape[0] - 1) @ self.U
        return G @ trig_rows(self.N, theta)

    def __call__(self, x, y):
        from .chebfourier import cf_evaluate
        return cf_evaluate(self.basis, self.U, x, y)


def solve_chebfourier(rho, f, N, lam=0.0, workers=1) -> ChebFourierSolution:
    """Chebyshev-Fourier solve; ``lam`` is a constant or monomial coefficients of
    lam(r) in r (e.g. [0, 0, 6400] for 80^2 r^2).  ``f`` is a callable or an
    (N+1) x (2N+1) coefficient matrix."""
    basis = ChebFourierBasis(rho, N)
    F = np.asarray(f, dtype=float) if not callable(f) else cf_expand(basis, f)
    U = np.zeros((N + 2, 2 * N + 1))

    def one(m):
        S = cf_assemble(basis, m, lam)
        res = []
        for j in ((1,) if m == 0 else (0, 1)):
            col = F[:, column_index(m, j)]
            res.append((j, bordered_solve(S, cf_rhs(basis, col)) if np.any(col) else np.zeros(N + 2)))
        return m, res

    for m, res in _map_modes(one, range(N + 1), workers):
        for j, u in res:
            U[:, column_index(m, j)] = u
    return ChebFourierSolution(basis, U)


# ---------------------------------------------------------------------
# spectral element
# ---------------------------------------------------------------------
@dataclass(frozen=True)
class Cell:
    inner: float
    outer: float

    @property
    def is_disk(self):
        return self.inner == 0.0

    @property
    def params(self):
        """Unit-annulus parameters of the rescaled cell (trial basis (0,0))."""
        return AnnulusParams(self.inner / self.outer, 0, 0)

    def contains(self, r):
        return (r >= self.inner) & (r <= self.outer)


def mesh_cells(radii):
    r = [float(v) for v in radii]
    if len(r) < 2:
        raise MeshError("a mesh needs at least two radii")
    if r[0] < 0 or abs(r[-1] - 1.0) > 0 or any(b <= a for a, b in zip(r, r[1:])):
        raise MeshError(f"radii must be strictly increasing from >= 0 to 1, got {r}")
    return [Cell(a, b) for a, b in zip(r, r[1:])]


def _cell_values(cell: Cell, m, count, r):
    if cell.is_disk:
        return DiskMode(0, m, cell.outer).radial_values(count, r)
    return radial_values(cell.params, m, count, np.asarray(r) / cell.outer)


def _cell_derivatives(cell: Cell, m, count, r):
    if cell.is_disk:
        return DiskMode(0, m, cell.outer).radial_derivatives(count, r)
    return radial_derivatives(cell.params, m, count, np.asarray(r) / cell.outer) / cell.outer


def _cell_block(cell: Cell, m, k, kappa):
    """k x (k+1) block of Delta + kappa from the (0) trial basis to the (2) test basis."""
    if cell.is_disk:
        mode = DiskMode(0, m, cell.outer)
        A = mode.laplacian(k + 1).with_bandwidths(0, 2)
        if kappa:
            A = A + mode.raise2(k + 1).with_bandwidths(0, 2) * float(kappa)
    else:
        p = cell.params
        A = laplacian_Z(p, m, k + 1).with_bandwidths(0, 4) * (1.0 / cell.outer**2)
        if kappa:
            R = general_raise_connection(p.family(m), da=2, db=2, N=k + 1).with_bandwidths(0, 4)
            A = A + R * float(kappa)
    return A.tosparse().tocsr()[:k, :]


def se_mode_system(cells, m, k, kappas, tau_scale=tau_continuity_scale):
    """Assembled system for one Fourier mode.

    Unknowns: k + 1 coefficients per cell (inner to outer), then one tau
    unknown per annulus cell.  Rows: boundary at r = 1, boundary at the inner
    radius (annulus meshes), continuity and derivative continuity per
    interface, then the k equation rows of each cell.  Returns a
    BorderedSystem.
    """
    C = len(cells)
    nu = k + 1
    tau_cells = [i for i, c in enumerate(cells) if not c.is_disk]
    ntau = len(tau_cells)
    ncol = C * nu + ntau
    tau_col = {i: C * nu + q for q, i in enumerate(tau_cells)}
    top = []

    row = np.zeros(ncol)
    row[(C - 1) * nu:C * nu] = _cell_values(cells[-1], m, nu, [1.0])[0]
    top.append(row)
    if not cells[0].is_disk:
        row = np.zeros(ncol)
        row[:nu] = _cell_values(cells[0], m, nu, [cells[0].inner])[0]
        top.append(row)
    for i in range(1, C):
        rI = cells[i].inner
        row = np.zeros(ncol)
        row[(i - 1) * nu:i * nu] = _cell_values(cells[i - 1], m, nu, [rI])[0]
        row[i * nu:(i + 1) * nu] = -_cell_values(cells[i], m, nu, [rI])[0]
        row[tau_col[i]] = tau_scale(m)
        top.append(row)
        row = np.zeros(ncol)
        row[(i - 1) * nu:i * nu] = _cell_derivatives(cells[i - 1], m, nu, [rI])[0]
        row[i * nu:(i + 1) * nu] = -_cell_derivatives(cells[i], m, nu, [rI])[0]
        top.append(row)

    blocks = [_cell_block(c, m, k, kap) for c, kap in zip(cells, kappas)]
    core = sp.block_diag(blocks, format="csr")
    extra = np.zeros((C * k, ntau))
    for q, i in enumerate(tau_cells):
        extra[(i + 1) * k - 1, q] = 1.0
    lo = int(max(0, -min(core.tocoo().col - core.tocoo().row, default=0)))
    hi = int(max(0, max(core.tocoo().col - core.tocoo().row, default=0)))
    return BorderedSystem(BandedMatrix.from_sparse(core, lo, hi), np.array(top), extra)


@dataclass
class CellSolution:
    cell: Cell
    N: int
    coeffs: dict = field(default_factory=dict)   # (m, j) -> k + 1 trial coefficients

    def radial(self, m, j, r):
        c = self.coeffs.get((m, j))
        if c is None:
            return np.zeros(np.size(r))
        return _cell_values(self.cell, m, c.shape[0], r) @ c

    def radial_derivative(self, m, j, r):
        c = self.coeffs.get((m, j))
        if c is None:
            return np.zeros(np.size(r))
        return _cell_derivatives(self.cell, m, c.shape[0], r) @ c

    def polar_values(self, r, theta):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        G = np.zeros((r.size, 2 * self.N + 1))
        for (m, j), c in self.coeffs.items():
            if np.any(c):
                G[:, column_index(m, j)] = _cell_values(self.cell, m, c.shape[0], r) @ c
        return G @ trig_rows(self.N, theta)

    @property
    def ndofs(self):
        return sum(c.shape[0] for c in self.coeffs.values())


@dataclass
class SpectralElementSolution:
    cells: list
    N: int
    cell_solutions: list
    taus: dict

    @property
    def ndofs(self):
        return sum(s.ndofs for s in self.cell_solutions)

    def polar_values(self, r, theta):
        """Values on r x theta; each radius is attributed to the first cell containing it."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.zeros((r.size, np.size(theta)))
        done = np.zeros(r.size, dtype=bool)
        for s in self.cell_solutions:
            sel = s.cell.contains(r) & ~done
            if np.any(sel):
                out[sel] = s.polar_values(r[sel], theta)
                done |= sel
        return out

    def interface_jumps(self, theta):
        """Max |jump u| and |jump du/dr| over the interfaces at the given angles."""
        ju = jd = 0.0
        T = trig_rows(self.N, theta)
        for a, b in zip(self.cell_solutions, self.cell_solutions[1:]):
            rI = b.cell.inner
            gu = np.zeros(2 * self.N + 1)
            gd = np.zeros(2 * self.N + 1)
            for m, j in mode_columns(self.N):
                col = column_index(m, j)
                gu[col] = a.radial(m, j, [rI])[0] - b.radial(m, j, [rI])[0]
                gd[col] = a.radial_derivative(m, j, [rI])[0] - b.radial_derivative(m, j, [rI])[0]
            ju = max(ju, float(np.max(np.abs(gu @ T))))
            jd = max(jd, float(np.max(np.abs(gd @ T))))
        return ju, jd


def _cell_rhs(cell: Cell, f, N):
    """Test-basis (2) coefficients of f restricted to the cell."""
    if cell.is_disk:
        return disk_analysis(f, N, 2, radius=cell.outer)
    params = AnnulusParams(cell.inner / cell.outer, 2, 2)
    grid = AnnulusGrid(params.rho, N)
    x, y = grid.points()
    s = cell.outer
    vals = np.asarray(f(s * x, s * y), dtype=float) * np.ones_like(x)
    return analysis(params, vals, N)


def solve_spectral_element(radii, f, N, kappas=None, workers=1,
                           tau_scale=tau_continuity_scale) -> SpectralElementSolution:
    """Spectral element solve of Delta u + kappa u = f on the mesh ``radii``
    (e.g. [0, 0.5, 1] for a disk cell plus an annulus cell).

    ``f`` is a callable or a list of per-cell callables; ``kappas`` holds one
    constant per cell (default zero).
    """
    cells = mesh_cells(radii)
    C = len(cells)
    kappas = [0.0] * C if kappas is None else [float(v) for v in kappas]
    if len(kappas) != C:
        raise InvalidParameter(f"need {C} cell coefficients, got {len(kappas)}")
    fs = list(f) if isinstance(f, (list, tuple)) else [f] * C
    if len(fs) != C:
        raise InvalidParameter(f"need {C} cell right-hand sides, got {len(fs)}")
    F = [_cell_rhs(c, fc, N) for c, fc in zip(cells, fs)]
    sols = [CellSolution(c, N) for c in cells]
    taus = {}

    def one(m):
        k = mode_size(N, m)
        S = se_mode_system(cells, m, k, kappas, tau_scale)
        res = []
        for j in ((1,) if m == 0 else (0, 1)):
            rhs = np.zeros(S.size)
            r0 = S.top_rows.shape[0]
            for i in range(C):
                rhs[r0 + i * k:r0 + (i + 1) * k] = F[i].mode(m, j)[:k]
            x = bordered_solve(S, rhs) if np.any(rhs) else np.zeros(S.size)
            res.append((j, x))
        return m, k, res

    for m, k, res in _map_modes(one, range(N + 1), workers):
        for j, x in res:
            for i in range(C):
                sols[i].coeffs[(m, j)] = x[i * (k + 1):(i + 1) * (k + 1)]
            taus[(m, j)] = x[C * (k + 1):]
    return SpectralElementSolution(cells, N, sols, taus)


# ---------------------------------------------------------------------
# error measurement
# ---------------------------------------------------------------------
def oversampled_grid(inner, outer, N, factor=4):
    """(r, theta) of the Zernike annular grid for degree factor * N, rescaled to
    the cell [inner, outer] (inner = 0 gives a disk grid)."""
    g = AnnulusGrid(inner / outer, max(1, int(factor * N)))
    return outer * g.r, g.theta


def _values_on(u, r, theta):
    if hasattr(u, "polar_values"):
        return u.polar_values(r, theta)
    if callable(u):
        x, y = _polar_mesh(r, theta)
        return np.asarray(u(x, y), dtype=float) * np.ones_like(x)
    return np.asarray(u, dtype=float)


def error_on_grid(u_numeric, u_reference, grid):
    """Sup-norm difference on a polar tensor grid (r, theta).  Either argument may
    be a solution object, a callable u(x, y) or an array of grid values."""
    r, theta = grid
    a = _values_on(u_numeric, r, theta)
    b = _values_on(u_reference, r, theta)
    return float(np.max(np.abs(a - b)))


def cell_errors(solution: SpectralElementSolution, u_reference, factor=4):
    """Per-cell sup-norm errors on oversampled cell grids; u_reference may be a
    callable or a list of per-cell callables."""
    refs = list(u_reference) if isinstance(u_reference, (list, tuple)) else [u_reference] * len(solution.cells)
    out = []
    for s, ref in zip(solution.cell_solutions, refs):
        grid = oversampled_grid(s.cell.inner, s.cell.outer, solution.N, factor)
        out.append(error_on_grid(s, ref, grid))
    return out
