"""Geometric and aggregation-based multigrid hierarchies and cycles.

Level 0 is the finest. ``levels[l].P`` maps level ``l + 1`` to level ``l``,
``levels[l].R = P^T`` and ``levels[l + 1].A = R A P`` (Galerkin). Smoothing
is lexicographic Gauss-Seidel: forward before the coarse correction,
backward after it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _csr_kernels as kern
from .krylov import gcr
from .smoothers import GaussSeidel

#: coarsest systems up to this size are factorised densely
DENSE_COARSE_LIMIT = 4000


@dataclass(eq=False)
class MgLevel:
    A: sp.csr_matrix
    P: Optional[sp.csr_matrix] = None
    R: Optional[sp.csr_matrix] = None
    smoother: Optional[GaussSeidel] = None

    @property
    def size(self) -> int:
        return self.A.shape[0]


class CoarseSolver:
    """Direct solver for the coarsest level: dense LU, or sparse LU above a size limit."""

    def __init__(self, A: sp.csr_matrix):
        self.n = A.shape[0]
        if self.n <= DENSE_COARSE_LIMIT:
            self._lu = scipy.linalg.lu_factor(A.toarray())
            self._sparse = None
        else:
            self._lu = None
            self._sparse = spla.splu(A.tocsc())

    def solve(self, b: np.ndarray) -> np.ndarray:
        if self._lu is not None:
            return scipy.linalg.lu_solve(self._lu, b)
        return self._sparse.solve(b)


@dataclass(eq=False)
class MgHierarchy:
    levels: list[MgLevel]
    kind: str
    nu1: int = 1
    nu2: int = 1
    inner_iterations: int = 2
    coarse: Optional[CoarseSolver] = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        for lvl in self.levels:
            lvl.A = sp.csr_matrix(lvl.A).sorted_indices()
        for lvl in self.levels[:-1]:
            lvl.smoother = GaussSeidel(lvl.A)
        if self.coarse is None:
            self.coarse = CoarseSolver(self.levels[-1].A)

    @property
    def depth(self) -> int:
        return len(self.levels)

    @property
    def sizes(self) -> list[int]:
        return [lvl.size for lvl in self.levels]


def _galerkin(A: sp.csr_matrix, P: sp.csr_matrix) -> sp.csr_matrix:
    Ac = (P.T @ A @ P).tocsr()
    Ac.sum_duplicates()
    Ac.sort_indices()
    return Ac


# ---------------------------------------------------------------------------
# geometric


def prolongation_1d(n_fine: int) -> sp.csr_matrix:
    """Linear interpolation from ``(n_fine - 1) / 2 + 1`` coarse nodes to ``n_fine`` nodes."""
    if n_fine < 3 or (n_fine - 1) % 2:
        raise ValueError(f"{n_fine} nodes cannot be coarsened by a factor 2")
    nc = (n_fine - 1) // 2 + 1
    rows, cols, vals = [], [], []
    for ic in range(nc):
        rows.append(2 * ic)
        cols.append(ic)
        vals.append(1.0)
    for ic in range(nc - 1):
        rows += [2 * ic + 1, 2 * ic + 1]
        cols += [ic, ic + 1]
        vals += [0.5, 0.5]
    return sp.csr_matrix((vals, (rows, cols)), shape=(n_fine, nc))


def prolongation_tensor(shape: Sequence[int]) -> sp.csr_matrix:
    """Multilinear prolongation for lexicographic ordering with the first axis fastest."""
    P = sp.csr_matrix(np.ones((1, 1)))
    for n in shape:
        P = sp.kron(prolongation_1d(n), P, format="csr")
    return P


def build_gmg(grid, fine_matrix, n_levels: int = 5, nu1: int = 1, nu2: int = 1) -> MgHierarchy:
    """Geometric hierarchy by standard coarsening of a ``(2^l + 1)^d`` node grid.

    ``grid`` is a :class:`~lisl_hjb.grid.Grid` or a tuple of nodes per dimension.
    """
    shape = tuple(grid.shape) if hasattr(grid, "shape") and not isinstance(grid, tuple) else tuple(grid)
    A = sp.csr_matrix(fine_matrix, dtype=float)
    if A.shape != (int(np.prod(shape)),) * 2:
        raise ValueError("matrix size does not match the grid")
    if n_levels < 1:
        raise ValueError("n_levels must be >= 1")
    factor = 2 ** (n_levels - 1)
    for n in shape:
        if (n - 1) % factor or (n - 1) // factor < 2:
            raise ValueError(f"grid {shape} cannot be coarsened to {n_levels} levels "
                             "(need 2^l + 1 nodes per dimension)")
    levels = [MgLevel(A)]
    cur = shape
    for _ in range(n_levels - 1):
        P = prolongation_tensor(cur)
        levels[-1].P, levels[-1].R = P, P.T.tocsr()
        levels.append(MgLevel(_galerkin(levels[-1].A, P)))
        cur = tuple((n - 1) // 2 + 1 for n in cur)
    return MgHierarchy(levels, "geometric", nu1, nu2, info={"coarse_shape": cur})


# ---------------------------------------------------------------------------
# aggregation


def pairwise_aggregates(A: sp.csr_matrix, beta: float = 0.25, exclude_ratio: Optional[float] = 5.0):
    """One pass of greedy pairwise matching on strong negative couplings.

    Coupling strength uses the symmetrised matrix ``(A + A^T) / 2``. An edge
    ``(i, j)`` is a candidate when ``-s_ij >= beta * max_k(-s_ik)`` for ``i``
    or ``j``; candidates are matched in order of decreasing ``-s_ij`` (ties
    by lower index). Rows with ``a_ii > exclude_ratio * sum_j |a_ij|`` are left
    out of the coarse level. Returns ``(aggregate id per node, n_coarse)``.
    """
    A = sp.csr_matrix(A)
    n = A.shape[0]
    S = ((A + A.T) * 0.5).tocoo()
    diag = A.diagonal()
    absoff = np.asarray(abs(A).sum(axis=1)).ravel() - np.abs(diag)
    eligible = np.ones(n, dtype=bool)
    if exclude_ratio is not None:
        eligible = ~(diag > exclude_ratio * absoff)
    off = (S.row != S.col) & (S.data < 0)
    i, j, w = S.row[off], S.col[off], -S.data[off]
    keep = eligible[i] & eligible[j]
    i, j, w = i[keep], j[keep], w[keep]
    strongest = np.zeros(n)
    np.maximum.at(strongest, i, w)
    strong = (w >= beta * strongest[i]) | (w >= beta * strongest[j])
    upper = i < j
    sel = strong & upper
    i, j, w = i[sel], j[sel], w[sel]
    order = np.lexsort((j, i, -w))
    agg, count = kern.greedy_matching(n, i[order].astype(np.int64), j[order].astype(np.int64), eligible)
    return agg, int(count)


def aggregate_prolongation(agg: np.ndarray, n_coarse: int) -> sp.csr_matrix:
    rows = np.flatnonzero(agg >= 0)
    return sp.csr_matrix((np.ones(rows.size), (rows, agg[rows])), shape=(agg.size, n_coarse))


def build_aggregation(matrix, stop_threshold: int = 0, beta: float = 0.25, passes: int = 2,
                      exclude_ratio: float = 5.0, max_levels: int = 40, nu1: int = 1,
                      nu2: int = 1, inner_iterations: int = 2) -> MgHierarchy:
    """Piecewise-constant hierarchy from repeated double pairwise aggregation.

    Coarsening stops once the size is at most ``max(stop_threshold, ceil(N^(1/3)))``
    or when a level fails to coarsen (fewer than 10% of unknowns removed, or
    no aggregates at all).
    """
    A = sp.csr_matrix(matrix, dtype=float)
    if A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    N = A.shape[0]
    stop = max(int(stop_threshold), math.ceil(N ** (1.0 / 3.0) - 1e-9))
    levels = [MgLevel(A)]
    while levels[-1].size > stop and len(levels) < max_levels:
        Af = levels[-1].A
        P = None
        Acur = Af
        for k in range(passes):
            agg, nc = pairwise_aggregates(Acur, beta, exclude_ratio if k == 0 else None)
            if nc == 0:
                P = None
                break
            Pk = aggregate_prolongation(agg, nc)
            P = Pk if P is None else (P @ Pk).tocsr()
            Acur = _galerkin(Acur, Pk)
        if P is None or P.shape[1] == 0 or P.shape[1] > 0.9 * Af.shape[0]:
            break
        levels[-1].P, levels[-1].R = P, P.T.tocsr()
        levels.append(MgLevel(_galerkin(Af, P)))
    return MgHierarchy(levels, "aggregation", nu1, nu2, inner_iterations,
                       info={"stop_size": stop})


# ---------------------------------------------------------------------------
# cycles


def _cycle(h: MgHierarchy, l: int, b: np.ndarray, x: np.ndarray, kind: str) -> np.ndarray:
    lvl = h.levels[l]
    if l == h.depth - 1:
        return h.coarse.solve(b)
    lvl.smoother.smooth(b, x, h.nu1, "forward")
    r = b - lvl.A @ x
    rc = lvl.R @ r
    nxt = l + 1
    if nxt == h.depth - 1:
        ec = h.coarse.solve(rc)
    elif kind == "K":
        Ac = h.levels[nxt].A
        ec, _ = gcr(Ac, rc, lambda v: _cycle(h, nxt, v, np.zeros_like(v), "K"),
                    tol=1e-14, max_iters=h.inner_iterations, restart=h.inner_iterations)
    else:
        ec = _cycle(h, nxt, rc, np.zeros_like(rc), kind)
        if kind == "W":
            ec = _cycle(h, nxt, rc, ec, kind)
    x += lvl.P @ ec
    lvl.smoother.smooth(b, x, h.nu2, "backward")
    return x


def mg_cycle(hierarchy: MgHierarchy, rhs, u, cycle: str = "V") -> np.ndarray:
    """One multigrid cycle (``"V"``, ``"W"`` or ``"K"``) starting from ``u``; returns the new iterate."""
    kind = cycle.upper()
    if kind not in ("V", "W", "K"):
        raise ValueError(f"unknown cycle {cycle!r}")
    x = np.array(u, dtype=float, copy=True)
    b = np.asarray(rhs, dtype=float)
    return _cycle(hierarchy, 0, b, x, kind)


class MgPreconditioner:
    """``r -> one cycle applied to A e = r`` from a zero initial guess."""

    def __init__(self, hierarchy: MgHierarchy, cycle: str = "K"):
        self.hierarchy = hierarchy
        self.cycle = cycle

    def __call__(self, r: np.ndarray) -> np.ndarray:
        return mg_cycle(self.hierarchy, r, np.zeros_like(r), self.cycle)


def complexity_metrics(hierarchy: MgHierarchy) -> tuple[float, float]:
    """Grid complexity ``sum N_l / N_0`` and algebraic complexity ``sum nnz_l / nnz_0``."""
    n0 = hierarchy.levels[0].size
    z0 = hierarchy.levels[0].A.nnz
    c_g = sum(l.size for l in hierarchy.levels) / n0
    c_a = sum(l.A.nnz for l in hierarchy.levels) / z0
    return float(c_g), float(c_a)
