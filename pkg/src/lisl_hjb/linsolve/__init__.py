"""Linear solvers for the policy-evaluation systems.

:func:`make_solver` turns a name (plus keyword parameters) into a
:class:`LinearSolver` with a uniform ``solve(A, b, x0=None, tol=None)``
interface returning ``(x, SolveReport)``. Available names:

``dense-lu``, ``sparse-lu``
    direct solves (one "iteration")
``gs``
    symmetric Gauss-Seidel iteration
``bicgstab``, ``bicgstab-ilu0``
    BiCGSTAB without / with ILU(0) right preconditioning
``gcr``, ``gcr-ilu0``
    flexible GCR without / with ILU(0)
``gmg``
    stand-alone geometric V(nu1, nu2) cycles (needs ``shape``)
``gcr-gmg``
    flexible GCR preconditioned by one geometric cycle
``agmg``
    flexible GCR preconditioned by an aggregation K-cycle (default)
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.io
import scipy.sparse as sp

from .direct import dense_lu_solve, direct_report, sparse_lu_solve
from .krylov import bicgstab, gcr
from .multigrid import (MgHierarchy, MgLevel, MgPreconditioner, build_aggregation, build_gmg,
                        complexity_metrics, mg_cycle, pairwise_aggregates)
from .report import SolveReport, SolverError
from .smoothers import GaussSeidel, ILU0, gauss_seidel, ilu0

SOLVER_NAMES = ("dense-lu", "sparse-lu", "gs", "bicgstab", "bicgstab-ilu0", "gcr", "gcr-ilu0",
                "gmg", "gcr-gmg", "agmg")


@dataclass
class LinearSolver:
    name: str
    tol: float = 1e-6
    max_iters: int = 500
    restart: int = 30
    params: dict = field(default_factory=dict)
    last_hierarchy: Optional[MgHierarchy] = None

    @property
    def iterative(self) -> bool:
        return self.name not in ("dense-lu", "sparse-lu")

    def solve(self, A, b, x0=None, tol: Optional[float] = None):
        A = sp.csr_matrix(A, dtype=float)
        b = np.asarray(b, dtype=float)
        tol = self.tol if tol is None else tol
        name = self.name
        if name == "dense-lu":
            x = dense_lu_solve(A, b)
            return x, direct_report(A, x, b, name)
        if name == "sparse-lu":
            x = sparse_lu_solve(A, b)
            return x, direct_report(A, x, b, name)
        if name == "gs":
            return self._stationary(A, b, x0, tol, GaussSeidel(A), None)
        if name in ("bicgstab", "bicgstab-ilu0"):
            M = ilu0(A).apply if name.endswith("ilu0") else None
            x, rep = bicgstab(A, b, M, tol, self.max_iters, x0)
        elif name in ("gcr", "gcr-ilu0"):
            M = ilu0(A).apply if name.endswith("ilu0") else None
            x, rep = gcr(A, b, M, tol, self.max_iters, self.restart, x0)
        elif name in ("gmg", "gcr-gmg"):
            shape = self.params.get("shape")
            if shape is None:
                raise ValueError("geometric multigrid needs the grid shape (params['shape'])")
            h = build_gmg(tuple(shape), A, self.params.get("n_levels", 5),
                          self.params.get("nu1", 1), self.params.get("nu2", 1))
            self.last_hierarchy = h
            cycle = self.params.get("cycle", "V")
            if name == "gmg":
                return self._stationary(A, b, x0, tol, None, (h, cycle))
            x, rep = gcr(A, b, MgPreconditioner(h, cycle), tol, self.max_iters, self.restart, x0)
        elif name == "agmg":
            h = build_aggregation(A, self.params.get("stop_threshold", 0),
                                  self.params.get("beta", 0.25),
                                  inner_iterations=self.params.get("inner_iterations", 2))
            self.last_hierarchy = h
            x, rep = gcr(A, b, MgPreconditioner(h, self.params.get("cycle", "K")), tol,
                         self.max_iters, self.restart, x0)
        else:
            raise ValueError(f"unknown solver {name!r}; choose from {SOLVER_NAMES}")
        rep.method = name
        if self.last_hierarchy is not None and name in ("gcr-gmg", "agmg"):
            rep.info["c_G"], rep.info["c_A"] = complexity_metrics(self.last_hierarchy)
            rep.info["levels"] = self.last_hierarchy.depth
        return x, rep

    def _stationary(self, A, b, x0, tol, smoother, mg):
        x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float, copy=True)
        bnorm = float(np.linalg.norm(b))
        hist = [float(np.linalg.norm(b - A @ x))]
        if bnorm == 0.0:
            return np.zeros_like(b), SolveReport(0, [0.0], True, self.name)
        while hist[-1] > tol * bnorm and len(hist) <= self.max_iters:
            if mg is not None:
                x = mg_cycle(mg[0], b, x, mg[1])
            else:
                smoother.smooth(b, x, 1, "symmetric")
            hist.append(float(np.linalg.norm(b - A @ x)))
        rep = SolveReport(len(hist) - 1, hist, hist[-1] <= tol * bnorm, self.name)
        if mg is not None:
            rep.info["c_G"], rep.info["c_A"] = complexity_metrics(mg[0])
            rep.info["levels"] = mg[0].depth
        return x, rep


def make_solver(name: str = "agmg", tol: float = 1e-6, max_iters: int = 500, restart: int = 30,
                **params) -> LinearSolver:
    key = name.strip().lower().replace("_", "-")
    if key not in SOLVER_NAMES:
        raise ValueError(f"unknown solver {name!r}; choose from {SOLVER_NAMES}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    return LinearSolver(key, tol, max_iters, restart, params)


def read_matrix_market(path) -> sp.csr_matrix:
    return sp.csr_matrix(scipy.io.mmread(str(path)))


__all__ = [
    "GaussSeidel", "ILU0", "LinearSolver", "MgHierarchy", "MgLevel", "MgPreconditioner",
    "SOLVER_NAMES", "SolveReport", "SolverError", "bicgstab", "build_aggregation", "build_gmg",
    "complexity_metrics", "dense_lu_solve", "gauss_seidel", "gcr", "ilu0", "make_solver",
    "mg_cycle", "pairwise_aggregates", "read_matrix_market", "sparse_lu_solve",
]
