import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lisl_hjb.grid import build_grid
from lisl_hjb.interp import interp_weights, interpolate


def test_node_gives_delta():
    g = build_grid([0, 0], [1, 1], [5, 5])
    for j in (0, 7, 12, 24):
        st_ = interp_weights(g, g.node(j))
        assert st_.entries == [(j, 1.0)]


def test_linear_1d():
    g = build_grid([0.0], [1.0], [2])
    st_ = interp_weights(g, [0.25])
    np.testing.assert_allclose(st_.weights, [0.75, 0.25])


def test_bilinear_unit_cell():
    g = build_grid([0, 0], [1, 1], [2, 2])
    st_ = interp_weights(g, [0.25, 0.5])
    # vertices in flat order: (0,0), (1,0), (0,1), (1,1)
    np.testing.assert_allclose(st_.weights, [0.375, 0.125, 0.375, 0.125])
    xy = np.prod(g.coords(), axis=1)
    assert interpolate(g, xy, [0.25, 0.5]) == pytest.approx(0.125)


def test_outside_raises():
    g = build_grid([0, 0], [1, 1], [3, 3])
    with pytest.raises(ValueError):
        interp_weights(g, [1.5, 0.5])


def test_partition_of_unity_and_positivity(rng):
    g = build_grid([-np.pi, -np.pi], [np.pi, np.pi], 17)
    pts = rng.uniform(-np.pi, np.pi, size=(10_000, 2))
    for x in pts:
        w = interp_weights(g, x).weights
        assert abs(w.sum() - 1.0) < 1e-14
        assert np.all(w >= 0)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3),
       st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_affine_reproduction(a0, a1, a2, s1, s2, s3):
    g = build_grid([0, 0, 0], [1, 2, 1], [4, 5, 3])
    X = g.coords()
    vals = a0 + a1 * X[:, 0] + a2 * X[:, 1] - X[:, 2]
    x = g.lo + np.array([s1, s2, s3]) * (g.hi - g.lo)
    exact = a0 + a1 * x[0] + a2 * x[1] - x[2]
    assert abs(interpolate(g, vals, x) - exact) < 1e-13 * (1 + abs(a0) + abs(a1) + abs(a2))
