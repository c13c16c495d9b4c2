"""Piecewise multilinear interpolation on a :class:`~lisl_hjb.grid.Grid`."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid, locate

#: weights below this are dropped and the rest renormalised
WEIGHT_CUTOFF = 1e-14


@dataclass(frozen=True)
class InterpStencil:
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def entries(self) -> list[tuple[int, float]]:
        return [(int(i), float(w)) for i, w in zip(self.nodes, self.weights)]

    def apply(self, values: np.ndarray) -> float:
        return float(np.dot(values[self.nodes], self.weights))


def corner_offsets(dim: int) -> np.ndarray:
    """Binary corner offsets of the unit cell, shape ``(2**dim, dim)``."""
    return (np.arange(2**dim)[:, None] >> np.arange(dim)[None, :]) & 1


def interp_weights(grid: Grid, x) -> InterpStencil:
    """Multilinear interpolation weights of ``x`` on the cell vertices.

    Raises
    ------
    ValueError
        If ``x`` lies outside the closed domain.
    """
    loc = locate(grid, x)
    if loc.status == "outside":
        raise ValueError(f"point {np.asarray(x).tolist()} lies outside the domain")
    corners = corner_offsets(grid.dim)
    local = loc.local
    w = np.prod(np.where(corners == 1, local, 1.0 - local), axis=1)
    keep = w >= WEIGHT_CUTOFF
    w = w[keep] / w[keep].sum()
    nodes = grid.flat_index(np.asarray(loc.cell) + corners[keep])
    nodes = np.atleast_1d(nodes)
    order = np.argsort(nodes)
    return InterpStencil(nodes[order], w[order])


def interpolate(grid: Grid, values: np.ndarray, x) -> float:
    return interp_weights(grid, x).apply(np.asarray(values))
