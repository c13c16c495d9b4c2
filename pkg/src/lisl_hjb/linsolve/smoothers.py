"""Gauss-Seidel sweeps and the ILU(0) preconditioner."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from . import _csr_kernels as kern


def _as_csr(matrix) -> sp.csr_matrix:
    A = sp.csr_matrix(matrix, dtype=float)
    if not A.has_sorted_indices:
        A = A.sorted_indices()
    return A


def _diagonal(A: sp.csr_matrix) -> np.ndarray:
    d = A.diagonal()
    bad = np.flatnonzero(d == 0.0)
    if bad.size:
        raise ZeroDivisionError(f"zero diagonal entry in row {bad[0]}")
    return d


def gauss_seidel(matrix, rhs, u, sweeps: int = 1, direction: str = "forward") -> np.ndarray:
    """Lexicographic Gauss-Seidel sweeps; returns the updated iterate (a copy).

    ``direction`` is ``"forward"``, ``"backward"`` or ``"symmetric"`` (one
    forward then one backward pass per sweep).
    """
    A = _as_csr(matrix)
    d = _diagonal(A)
    x = np.array(u, dtype=float, copy=True)
    b = np.asarray(rhs, dtype=float)
    _sweep(A, d, b, x, sweeps, direction)
    return x


def _sweep(A, d, b, x, sweeps, direction):
    if direction not in ("forward", "backward", "symmetric"):
        raise ValueError(f"unknown sweep direction {direction!r}")
    for _ in range(sweeps):
        if direction in ("forward", "symmetric"):
            kern.gs_forward(A.indptr, A.indices, A.data, d, b, x)
        if direction in ("backward", "symmetric"):
            kern.gs_backward(A.indptr, A.indices, A.data, d, b, x)


class GaussSeidel:
    """Reusable smoother bound to one matrix (avoids re-extracting the diagonal)."""

    def __init__(self, matrix):
        self.A = _as_csr(matrix)
        self.diag = _diagonal(self.A)

    def smooth(self, rhs, x, sweeps: int, direction: str) -> None:
        """In-place sweeps on ``x``."""
        _sweep(self.A, self.diag, rhs, x, sweeps, direction)


class ILU0:
    """Incomplete LU factorisation restricted to the sparsity pattern of the matrix."""

    def __init__(self, matrix):
        A = _as_csr(matrix)
        lu, diag_ptr, bad = kern.ilu0_factor(A.indptr, A.indices, A.data)
        if bad >= 0:
            raise ZeroDivisionError(f"ILU(0): zero pivot in row {bad}")
        self.indptr, self.indices, self.lu, self.diag_ptr = A.indptr, A.indices, lu, diag_ptr
        self.shape = A.shape

    def apply(self, r) -> np.ndarray:
        """Return ``(LU)^{-1} r``."""
        return kern.ilu0_solve(self.indptr, self.indices, self.lu, self.diag_ptr,
                               np.asarray(r, dtype=float))

    __call__ = apply

    def factors(self) -> tuple[sp.csr_matrix, sp.csr_matrix]:
        """Unit lower and upper triangular factors as sparse matrices."""
        M = sp.csr_matrix((self.lu, self.indices, self.indptr), shape=self.shape)
        L = sp.tril(M, k=-1) + sp.identity(self.shape[0])
        U = sp.triu(M)
        return L.tocsr(), U.tocsr()


def ilu0(matrix) -> ILU0:
    return ILU0(matrix)
