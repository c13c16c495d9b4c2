"""Direct solvers: dense LU (small-scale oracle) and sparse LU."""

from __future__ import annotations

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .report import SolveReport

#: dense LU refuses systems larger than this (memory guard)
DENSE_LIMIT = 20000


def dense_lu_solve(matrix, rhs) -> np.ndarray:
    A = matrix.toarray() if sp.issparse(matrix) else np.asarray(matrix, dtype=float)
    if A.shape[0] > DENSE_LIMIT:
        raise ValueError(f"dense LU limited to n <= {DENSE_LIMIT}, got {A.shape[0]}")
    return scipy.linalg.lu_solve(scipy.linalg.lu_factor(A), np.asarray(rhs, dtype=float))


def sparse_lu_solve(matrix, rhs) -> np.ndarray:
    return spla.splu(sp.csc_matrix(matrix, dtype=float)).solve(np.asarray(rhs, dtype=float))


def direct_report(A, x, b, method: str) -> SolveReport:
    b = np.asarray(b, dtype=float)
    r0 = float(np.linalg.norm(b))
    r1 = float(np.linalg.norm(b - A @ x))
    if r0 == 0.0:
        return SolveReport(0, [0.0], True, method)
    return SolveReport(1, [r0, r1], True, method)
