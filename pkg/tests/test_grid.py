import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lisl_hjb.grid import build_grid, locate

PI = np.pi


def test_problem_a_grid():
    g = build_grid([-PI, -PI], [PI, PI], 41)
    np.testing.assert_allclose(g.dx, [2 * PI / 40] * 2)
    assert g.n_nodes == 1681


def test_smallest_mesh():
    g = build_grid([0.0], [1.0], [2])
    np.testing.assert_allclose(g.dx, [1.0])
    np.testing.assert_allclose(g.coords().ravel(), [0.0, 1.0])
    assert g.boundary_mask().all()
    assert g.interior_indices().size == 0


def test_shifted_grid():
    g = build_grid([-PI / 8, -PI / 8], [15 * PI / 8, 15 * PI / 8], 81)
    np.testing.assert_allclose(g.dx, [2 * PI / 80] * 2)


def test_first_coordinate_runs_fastest():
    g = build_grid([0, 0], [2, 3], [3, 4])
    X = g.coords()
    np.testing.assert_allclose(X[:3], [[0, 0], [1, 0], [2, 0]])
    np.testing.assert_allclose(X[3], [0, 1])
    assert g.flat_index([1, 2]) == 7


@pytest.mark.parametrize("lo,hi,n", [([0], [1], [1]), ([0, 0], [1, 0], [3, 3]), ([0], [1, 2], [3])])
def test_invalid_grids(lo, hi, n):
    with pytest.raises(ValueError):
        build_grid(lo, hi, n)


def test_node_coordinates_on_lattice():
    g = build_grid([-1.0, 2.0], [3.0, 5.0], [5, 7])
    X = g.coords()
    k = (X - g.lo) / g.dx
    np.testing.assert_allclose(k, np.round(k), atol=1e-12)


def test_boundary_classification_partitions_nodes():
    g = build_grid([0, 0, 0], [1, 1, 1], [4, 5, 3])
    b, i = g.boundary_indices(), g.interior_indices()
    assert np.intersect1d(b, i).size == 0
    assert b.size + i.size == g.n_nodes
    k = g.multi_index(b)
    assert np.all(np.any((k == 0) | (k == np.array(g.shape) - 1), axis=1))


def test_interior_nodes_are_dx_away_from_boundary():
    g = build_grid([0, 0], [1, 2], [6, 9])
    X = g.coords()[g.interior_indices()]
    gap = np.minimum(X - g.lo, g.hi - X)
    assert np.all(gap >= g.dx - 1e-12)


def test_locate_node_and_midpoint():
    g = build_grid([0.0], [1.0], [5])
    loc = locate(g, [0.25])
    assert loc.status == "inside"
    assert set(np.round(loc.local, 12)) <= {0.0, 1.0}
    mid = locate(g, [0.25 + 0.125])
    np.testing.assert_allclose(mid.local, [0.5])
    assert locate(g, [1.0 + 0.25]).status == "outside"


def test_locate_snaps_boundary():
    g = build_grid([0.0, 0.0], [1.0, 1.0], [3, 3])
    loc = locate(g, [1.0 + 1e-14, 0.3])
    assert loc.status == "on_boundary"
    assert 0.0 <= loc.local.min() and loc.local.max() <= 1.0


def test_locate_round_trip_exhaustive():
    g = build_grid([-1.0, 0.0], [1.0, 3.0], [5, 4])
    for j in range(g.n_nodes):
        loc = locate(g, g.node(j))
        assert loc.status in ("inside", "on_boundary")
        k = np.asarray(loc.cell) + np.round(loc.local).astype(int)
        assert g.flat_index(k) == j


@given(st.lists(st.integers(2, 6), min_size=1, max_size=3))
def test_flat_multi_index_inverse(shape):
    g = build_grid([0.0] * len(shape), [1.0] * len(shape), shape)
    flat = np.arange(g.n_nodes)
    np.testing.assert_array_equal(g.flat_index(g.multi_index(flat)), flat)
