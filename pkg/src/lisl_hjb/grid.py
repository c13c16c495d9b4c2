"""Uniform Cartesian meshes on rectangular domains.

Nodes are ordered lexicographically with the first coordinate running
fastest, so node ``(k_0, k_1, ..., k_{d-1})`` has flat index
``k_0 + n_0 * (k_1 + n_1 * (k_2 + ...))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

#: relative (to dx) tolerance used to decide that a point lies on the boundary
BOUNDARY_TOL = 1e-12


@dataclass(frozen=True)
class CellLocation:
    """Result of :func:`locate`.

    ``status`` is one of ``"inside"``, ``"on_boundary"`` or ``"outside"``.
    For the first two, ``cell`` is the multi-index of the lower corner of the
    containing cell and ``local`` holds coordinates in ``[0, 1]^d``.
    """

    status: str
    cell: tuple[int, ...] | None = None
    local: np.ndarray | None = None


@dataclass(frozen=True, eq=False)
class Grid:
    lo: np.ndarray
    hi: np.ndarray
    shape: tuple[int, ...]
    dx: np.ndarray = field(init=False)

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        shape = tuple(int(n) for n in np.atleast_1d(self.shape))
        if not (lo.ndim == 1 and lo.shape == hi.shape and len(shape) == lo.size):
            raise ValueError("lo, hi and nodes_per_dim must have the same length")
        if np.any(hi <= lo):
            raise ValueError(f"degenerate domain: hi={hi} must exceed lo={lo} componentwise")
        if any(n < 2 for n in shape):
            raise ValueError(f"need at least 2 nodes per dimension, got {shape}")
        lo.setflags(write=False)
        hi.setflags(write=False)
        dx = (hi - lo) / (np.asarray(shape) - 1)
        dx.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "dx", dx)

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.shape))

    @property
    def h(self) -> float:
        """Scalar mesh parameter used by the LISL step lengths (max of dx)."""
        return float(np.max(self.dx))

    @property
    def strides(self) -> np.ndarray:
        return np.concatenate(([1], np.cumprod(self.shape[:-1]))).astype(np.int64)

    def flat_index(self, multi) -> np.ndarray | int:
        multi = np.asarray(multi, dtype=np.int64)
        return multi @ self.strides if multi.ndim > 1 else int(multi @ self.strides)

    def multi_index(self, flat) -> np.ndarray:
        flat = np.asarray(flat, dtype=np.int64)
        out = np.empty(flat.shape + (self.dim,), dtype=np.int64)
        rem = flat.copy()
        for i, n in enumerate(self.shape):
            out[..., i] = rem % n
            rem = rem // n
        return out

    def coords(self) -> np.ndarray:
        """Node coordinates as an ``(n_nodes, dim)`` array."""
        axes = [self.lo[i] + self.dx[i] * np.arange(n) for i, n in enumerate(self.shape)]
        # reverse for meshgrid so that the first coordinate runs fastest
        mesh = np.meshgrid(*axes[::-1], indexing="ij")
        return np.stack([m.ravel() for m in mesh[::-1]], axis=1)

    def node(self, flat: int) -> np.ndarray:
        return self.lo + self.dx * self.multi_index(flat)

    def boundary_mask(self) -> np.ndarray:
        k = self.multi_index(np.arange(self.n_nodes))
        n = np.asarray(self.shape)
        return np.any((k == 0) | (k == n - 1), axis=1)

    def interior_indices(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_mask())

    def boundary_indices(self) -> np.ndarray:
        return np.flatnonzero(self.boundary_mask())

    def contains(self, x, tol: float = BOUNDARY_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        slack = tol * self.dx
        return bool(np.all(x >= self.lo - slack) and np.all(x <= self.hi + slack))

    def to_dict(self) -> dict:
        return {"lo": self.lo.tolist(), "hi": self.hi.tolist(), "nodes_per_dim": list(self.shape)}


def build_grid(lo: Sequence[float], hi: Sequence[float], nodes_per_dim: Sequence[int] | int) -> Grid:
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    if np.isscalar(nodes_per_dim) or np.ndim(nodes_per_dim) == 0:
        nodes_per_dim = [int(nodes_per_dim)] * lo.size
    return Grid(lo, np.atleast_1d(np.asarray(hi, dtype=float)), tuple(nodes_per_dim))


def locate(grid: Grid, x) -> CellLocation:
    """Find the cell containing ``x``.

    Points within ``1e-12 * dx`` of a face are reported as on the boundary and
    snapped onto it; anything further out is ``outside``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (grid.dim,):
        raise ValueError(f"expected a point of dimension {grid.dim}")
    s = (x - grid.lo) / grid.dx
    n = np.asarray(grid.shape)
    tol = BOUNDARY_TOL
    if np.any(s < -tol) or np.any(s > n - 1 + tol):
        return CellLocation("outside")
    on_face = (np.abs(s) <= tol) | (np.abs(s - (n - 1)) <= tol)
    s = np.clip(s, 0.0, n - 1)
    s[np.abs(s - np.rint(s)) <= tol] = np.rint(s[np.abs(s - np.rint(s)) <= tol])
    cell = np.minimum(np.floor(s).astype(np.int64), n - 2)
    local = s - cell
    status = "on_boundary" if np.any(on_face) else "inside"
    return CellLocation(status, tuple(int(c) for c in cell), local)
