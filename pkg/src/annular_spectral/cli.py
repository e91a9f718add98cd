"""Command-line driver for the benchmark experiments.

    annular-spectral solve       --config cfg.json [--threads k] [--out dir]
    annular-spectral convergence --config cfg.json [--threads k] [--out dir]
    annular-spectral structure   --config cfg.json [--threads k] [--out dir]
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import problems
from .annulus import AnnulusGrid, AnnulusParams, column_index, laplacian_W, mode_columns, mode_size
from .chebfourier import ChebFourierBasis, cf_assemble
from .errors import InvalidParameter, MeshError, SingularSystem
from .solvers import (ChebFourierSolution, SpectralElementSolution, ZernikeAnnularSolution,
                      ZernikeDiskSolution, cell_errors, error_on_grid, lam_r2_chebyshev,
                      mesh_cells, oversampled_grid, se_mode_system, solve_chebfourier,
                      solve_spectral_element, solve_zernike_annular, solve_zernike_annular_ncc,
                      solve_zernike_disk)

SOLVERS = ("zernike_annular", "chebfourier", "spectral_element", "zernike_disk")
CONVERGENCE_FIELDS = ["experiment", "solver", "N", "dofs", "sup_error", "wall_ms"]
STRUCTURE_FIELDS = ["experiment", "solver", "m", "size", "lower_bw", "upper_bw",
                    "dense_rows", "cond", "cond_precond"]


class UnknownRhs(KeyError):
    pass


# ---------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------
@dataclass
class ExperimentConfig:
    experiment: str
    domain: dict
    solvers: list
    N: list
    rhs: str = "zero"
    rhs_params: dict = field(default_factory=dict)
    oversample: int = 4
    reference_factor: float = 1.5
    out: str = "results"
    timing: bool = True

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        N = d.get("N", [])
        N = [int(N)] if isinstance(N, (int, float)) else [int(v) for v in N]
        if not N or any(b <= a for a, b in zip(N, N[1:])):
            raise InvalidParameter(f"N sweep must be a nonempty strictly increasing list, got {N}")
        solvers = list(d.get("solvers", []))
        bad = [s for s in solvers if s not in SOLVERS]
        if bad or not solvers:
            raise InvalidParameter(f"unknown or missing solvers {bad or solvers}; choose from {SOLVERS}")
        rhs = d.get("rhs", "zero")
        if rhs not in RHS_CATALOG:
            raise UnknownRhs(rhs)
        return cls(experiment=str(d.get("experiment", "experiment")),
                   domain=dict(d.get("domain", {"type": "annulus", "rho": 0.5})),
                   solvers=solvers, N=N, rhs=rhs,
                   rhs_params=dict(d.get("rhs_params", {})),
                   oversample=int(d.get("oversample", 4)),
                   reference_factor=float(d.get("reference_factor", 1.5)),
                   out=str(d.get("out", "results")),
                   timing=bool(d.get("timing", True)))

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    @property
    def radii(self):
        kind = self.domain.get("type", "annulus")
        if kind == "annulus":
            return [float(self.domain["rho"]), 1.0]
        if kind == "disk":
            return [0.0, 1.0]
        if kind == "cells":
            return [float(v) for v in self.domain["radii"]]
        raise InvalidParameter(f"unknown domain type {kind!r}")


# ---------------------------------------------------------------------
# problem catalog
# ---------------------------------------------------------------------
@dataclass
class Problem:
    """f with optional per-cell branches, lam as monomials in r^2, per-cell
    kappa, and the exact solution when known."""
    f: object
    lam_r2: tuple = (0.0,)
    f_cells: list = None
    kappas: list = None
    exact: object = None
    exact_cells: list = None


def _zero(cfg):
    return Problem(lambda x, y: np.zeros(np.broadcast(x, y).shape), exact=lambda x, y: np.zeros(np.broadcast(x, y).shape))


def _quartic(cfg):
    rho = cfg.radii[0]
    return Problem(problems.quartic_rhs(rho), exact=problems.quartic_solution(rho))


def _gaussian_bump(cfg):
    p = {"a": 250.0, "b": 0.0, "c": 0.6, **cfg.rhs_params}
    return Problem(problems.gaussian_bump_rhs(p["a"], p["b"], p["c"]),
                   exact=problems.gaussian(p["a"], p["b"], p["c"]))


def _forced(cfg):
    return Problem(problems.sin100x, lam_r2=problems.FORCED_LAMBDA_R2)


def _five_gaussian(helmholtz):
    def build(cfg):
        radii = cfg.radii
        rho = float(cfg.rhs_params.get("rho", radii[1] if len(radii) > 2 else 0.5))
        P = problems.FiveGaussianProblem(rho=rho,
                                         kappa0=float(cfg.rhs_params.get("kappa0", 100.0)),
                                         kappa1=float(cfg.rhs_params.get("kappa1", 1.0)))
        return Problem(P.rhs(helmholtz),
                       f_cells=[P.rhs_cell(0, helmholtz), P.rhs_cell(1, helmholtz)],
                       kappas=[P.kappa0, P.kappa1] if helmholtz else None,
                       exact=P.solution(),
                       exact_cells=[P.solution_cell(0), P.solution_cell(1)])
    return build


RHS_CATALOG = {
    "zero": _zero,
    "quartic": _quartic,
    "gaussian_bump": _gaussian_bump,
    "sin100x": _forced,
    "five_gaussian_poisson": _five_gaussian(False),
    "five_gaussian_helmholtz": _five_gaussian(True),
}


def build_problem(cfg: ExperimentConfig) -> Problem:
    try:
        return RHS_CATALOG[cfg.rhs](cfg)
    except KeyError:
        raise UnknownRhs(cfg.rhs) from None


# ---------------------------------------------------------------------
# running solvers
# ---------------------------------------------------------------------
def _r_monomials(lam_r2):
    out = np.zeros(2 * len(lam_r2) - 1)
    out[::2] = lam_r2
    return out


def run_solver(name, cfg: ExperimentConfig, prob: Problem, N, workers=1):
    radii = cfg.radii
    lam = np.asarray(prob.lam_r2, dtype=float)
    if name == "zernike_annular":
        if len(radii) != 2 or radii[0] <= 0:
            raise MeshError("zernike_annular needs an annulus domain")
        rho = radii[0]
        if lam.shape[0] > 1:
            return solve_zernike_annular_ncc(rho, prob.f, N, lam_r2_chebyshev(rho, lam), workers)
        return solve_zernike_annular(rho, prob.f, N, float(lam[0]), workers)
    if name == "chebfourier":
        if len(radii) != 2 or radii[0] <= 0:
            raise MeshError("chebfourier needs an annulus domain")
        lam_r = _r_monomials(lam) if lam.shape[0] > 1 else float(lam[0])
        return solve_chebfourier(radii[0], prob.f, N, lam_r, workers)
    if name == "zernike_disk":
        if radii != [0.0, 1.0] and radii[0] != 0.0:
            raise MeshError("zernike_disk needs a disk domain")
        if lam.shape[0] > 1:
            raise InvalidParameter("zernike_disk supports constant lam only")
        return solve_zernike_disk(prob.f, N, float(lam[0]), workers)
    if name == "spectral_element":
        cells = mesh_cells(radii)
        f = prob.f_cells if prob.f_cells is not None and len(prob.f_cells) == len(cells) else prob.f
        kappas = prob.kappas
        if kappas is None:
            if lam.shape[0] > 1:
                raise InvalidParameter("spectral_element supports constant lam per cell")
            kappas = [float(lam[0])] * len(cells)
        return solve_spectral_element(radii, f, N, kappas, workers)
    raise InvalidParameter(f"unknown solver {name!r}")


def sup_error(cfg, prob, sol, N, reference=None):
    """Sup-norm error on the oversampled grid(s) against the exact solution or
    a reference solution object."""
    if isinstance(sol, SpectralElementSolution):
        ref = prob.exact_cells if prob.exact_cells is not None else (reference or prob.exact)
        return max(cell_errors(sol, ref, cfg.oversample))
    radii = cfg.radii
    grid = oversampled_grid(radii[0], radii[-1], N, cfg.oversample)
    target = prob.exact if prob.exact is not None else reference
    if target is None:
        raise InvalidParameter("no exact solution or reference available")
    return error_on_grid(sol, target, grid)


def reference_solution(cfg, prob, workers=1):
    """Over-resolved Chebyshev-Fourier solution at reference_factor * max N."""
    Nref = int(math.ceil(cfg.reference_factor * max(cfg.N)))
    ref = run_solver("chebfourier", cfg, prob, Nref, workers)
    tail = float(np.max(np.abs(ref.U[-4:, :]))) / max(1.0, float(np.max(np.abs(ref.U))))
    return ref, tail


# ---------------------------------------------------------------------
# output
# ---------------------------------------------------------------------
def coefficients_json(sol, N):
    """Mode-major coefficient dump: one entry per (m, j)."""
    modes = []
    if isinstance(sol, (ZernikeAnnularSolution, ZernikeDiskSolution)):
        basis = "weighted_zernike_annular" if isinstance(sol, ZernikeAnnularSolution) else "weighted_zernike_disk"
        for m, j in mode_columns(N):
            modes.append({"m": m, "j": j, "coeffs": sol.coeffs.mode(m, j).tolist()})
        extra = {"rho": sol.params.rho} if isinstance(sol, ZernikeAnnularSolution) else {}
        return {"basis": basis, "N": N, **extra, "modes": modes}
    if isinstance(sol, ChebFourierSolution):
        for m, j in mode_columns(N):
            modes.append({"m": m, "j": j, "coeffs": sol.U[:, column_index(m, j)].tolist()})
        return {"basis": "chebyshev_fourier", "N": N, "rho": sol.basis.rho, "modes": modes}
    cells = []
    for cs in sol.cell_solutions:
        cm = [{"m": m, "j": j, "coeffs": cs.coeffs[(m, j)].tolist()} for m, j in mode_columns(N)]
        cells.append({"inner": cs.cell.inner, "outer": cs.cell.outer,
                      "basis": "zernike_disk" if cs.cell.is_disk else "zernike_annular", "modes": cm})
    taus = [{"m": m, "j": j, "tau": sol.taus[(m, j)].tolist()} for m, j in mode_columns(N)]
    return {"basis": "spectral_element", "N": N, "cells": cells, "taus": taus}


def _grid_rows(cfg, sol, N):
    radii = cfg.radii
    g = AnnulusGrid(radii[0] / radii[-1], N)
    r = g.r * radii[-1]
    vals = sol.polar_values(r, g.theta)
    for i, ri in enumerate(r):
        for l, th in enumerate(g.theta):
            yield [repr(float(ri)), repr(float(th)), repr(float(vals[i, l]))]


def _fmt(v):
    return repr(float(v))


# ---------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------
def cmd_solve(cfg: ExperimentConfig, out_dir, workers=1, log=print):
    prob = build_problem(cfg)
    N = cfg.N[-1]
    os.makedirs(out_dir, exist_ok=True)
    summary = {"experiment": cfg.experiment, "N": N, "solvers": {}}
    for name in cfg.solvers:
        sol = run_solver(name, cfg, prob, N, workers)
        with open(os.path.join(out_dir, f"{cfg.experiment}_{name}_coeffs.json"), "w") as fh:
            json.dump(coefficients_json(sol, N), fh)
        with open(os.path.join(out_dir, f"{cfg.experiment}_{name}_grid.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "theta", "u"])
            w.writerows(_grid_rows(cfg, sol, N))
        entry = {"dofs": int(sol.ndofs)}
        if prob.exact is not None:
            entry["sup_error"] = sup_error(cfg, prob, sol, N)
            log(f"{cfg.experiment} {name} N={N} sup_error={entry['sup_error']:.3e}")
        summary["solvers"][name] = entry
    with open(os.path.join(out_dir, f"{cfg.experiment}_summary.json"), "w") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
    return summary


def convergence_rows(cfg: ExperimentConfig, workers=1):
    prob = build_problem(cfg)
    reference = None
    if prob.exact is None:
        reference, _ = reference_solution(cfg, prob, workers)
    rows = []
    for name in cfg.solvers:
        for N in cfg.N:
            t0 = time.perf_counter()
            sol = run_solver(name, cfg, prob, N, workers)
            wall = (time.perf_counter() - t0) * 1e3
            err = sup_error(cfg, prob, sol, N, reference)
            rows.append({"experiment": cfg.experiment, "solver": name, "N": N,
                         "dofs": int(sol.ndofs), "sup_error": err,
                         "wall_ms": round(wall, 1) if cfg.timing else 0})
    return rows


def cmd_convergence(cfg: ExperimentConfig, out_dir, workers=1, log=print):
    rows = convergence_rows(cfg, workers)
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{cfg.experiment}_convergence.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CONVERGENCE_FIELDS)
        for r in rows:
            w.writerow([r["experiment"], r["solver"], r["N"], r["dofs"], _fmt(r["sup_error"]), r["wall_ms"]])
            log(f"{r['solver']:>18s} N={r['N']:4d} dofs={r['dofs']:7d} err={r['sup_error']:.3e}")
    return rows


def _conds(A):
    A = np.asarray(A, dtype=float)
    cond = float(np.linalg.cond(A))
    d = np.diag(A)
    if np.any(d == 0):
        return cond, float("nan")
    return cond, float(np.linalg.cond(A / d[:, None]))


def _bands(A):
    i, j = np.nonzero(A)
    if i.size == 0:
        return 0, 0
    return int(max(0, (i - j).max())), int(max(0, (j - i).max()))


def structure_rows(cfg: ExperimentConfig, workers=1):
    """Per-mode sizes, bandwidths and condition numbers of the Poisson mode
    matrices (m = 0..N at the largest N of the sweep)."""
    N = cfg.N[-1]
    radii = cfg.radii
    rows = []
    for name in cfg.solvers:
        for m in range(N + 1):
            if name == "zernike_annular":
                A = laplacian_W(AnnulusParams(radii[0], 1, 1), m, mode_size(N, m)).todense()
                lo, up = _bands(A)
                dense = 0
            elif name == "chebfourier":
                S = cf_assemble(ChebFourierBasis(radii[0], N), m, 0.0)
                A = S.todense()
                lo, up = _bands(S.core.todense())
                dense = S.top_rows.shape[0]
            elif name == "spectral_element":
                cells = mesh_cells(radii)
                S = se_mode_system(cells, m, mode_size(N, m), [0.0] * len(cells))
                A = S.todense()
                lo, up = _bands(S.core.todense())
                dense = S.top_rows.shape[0]
            else:
                raise InvalidParameter(f"structure is not defined for solver {name!r}")
            cond, condp = _conds(A)
            rows.append({"experiment": cfg.experiment, "solver": name, "m": m,
                         "size": A.shape[0], "lower_bw": lo, "upper_bw": up,
                         "dense_rows": dense, "cond": cond, "cond_precond": condp})
    return rows


def cmd_structure(cfg: ExperimentConfig, out_dir, workers=1, log=print):
    rows = structure_rows(cfg, workers)
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{cfg.experiment}_structure.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(STRUCTURE_FIELDS)
        for r in rows:
            w.writerow([r[k] if k not in ("cond", "cond_precond") else _fmt(r[k]) for k in STRUCTURE_FIELDS])
    log(f"wrote {len(rows)} rows to {path}")
    return rows


COMMANDS = {"solve": cmd_solve, "convergence": cmd_convergence, "structure": cmd_structure}


def main(argv=None):
    parser = argparse.ArgumentParser(prog="annular-spectral",
                                     description="Spectral Helmholtz solvers on disks and annuli.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="experiment JSON file")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for per-mode solves")
    parser.add_argument("--out", default=None, help="output directory (overrides the config)")
    args = parser.parse_args(argv)
    try:
        cfg = ExperimentConfig.load(args.config)
    except UnknownRhs as exc:
        print(f"error: unknown rhs id {exc.args[0]!r}; known ids: {', '.join(sorted(RHS_CATALOG))}",
              file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: invalid config {args.config}: {exc}", file=sys.stderr)
        return 2
    out = args.out or cfg.out
    try:
        COMMANDS[args.command](cfg, out, max(1, args.threads))
    except (SingularSystem, ValueError, np.linalg.LinAlgError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
