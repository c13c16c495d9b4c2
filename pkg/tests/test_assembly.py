import numpy as np
import pytest
import scipy.sparse as sp

from lisl_hjb.analysis import build_lisl_matrix
from lisl_hjb.assembly import (RowCache, SparseSystem, ThetaContext, assemble_theta_system,
                               build_rows, export_matrix_market, matrix_diagnostics,
                               closed_form_column_bound, row_coefficients)
from lisl_hjb.grid import build_grid
from lisl_hjb.hjb_solver import cfl_bound, howard_solve
from lisl_hjb.linsolve import make_solver, read_matrix_market
from lisl_hjb.problems import builtin_problem
from lisl_hjb.stencil import Overstep, build_node_stencil

PI = np.pi


def test_row_lands_on_nodes_1d():
    g = build_grid([0.0], [1.0], [17])  # dx = 1/16, sqrt(dx) = 1/4
    st_ = build_node_stencil(g, [0.5], 2, [[0.5]], [0.0])  # step 2 dx
    rc = row_coefficients(g, [0.5], st_)
    assert rc.l_hat == pytest.approx({6: 8.0, 10: 8.0})
    assert rc.diag_sum == pytest.approx(16.0)
    assert rc.boundary_rhs == 0.0


@pytest.mark.parametrize("m,gamma", [(1, 0.5), (2, 0.25), (3, 1.0)])
def test_row_matches_lisl_matrix_pattern(m, gamma):
    N = 65
    g = build_grid([0.0], [1.0], [N])
    dx = g.h
    sigma = (m + 1 - gamma) * dx / np.sqrt(dx)
    j = N // 2
    x = g.node(j)
    rc = row_coefficients(g, x, build_node_stencil(g, x, 2, [[sigma]], [0.0]))
    L = build_lisl_matrix(N - 2, m, gamma).toarray()
    r = j - 1  # row of the interior-only matrix
    want = {c + 1: -L[r, c] / (2 * dx) for c in np.flatnonzero(L[r]) if c != r}
    got = {k: v for k, v in rc.l_hat.items() if abs(v) > 1e-12}
    assert set(got) == set(want)
    for k in want:
        assert got[k] == pytest.approx(want[k], rel=1e-10)
    assert rc.diag_sum == pytest.approx(L[r, r] / (2 * dx))


def test_truncated_endpoint_goes_to_rhs():
    g = build_grid([0.0], [1.0], [17])
    x = np.array([15 / 16])
    st_ = build_node_stencil(g, x, 2, [[1.0]], [0.0])  # y = +-1/4
    assert st_[0].overstep is Overstep.ONE_SIDED_PLUS
    rc = row_coefficients(g, x, st_, psi=lambda p: np.full(p.shape[0], 3.0))
    assert rc.boundary_rhs == pytest.approx(6.4 * 8 * 3.0)
    assert 16 not in rc.l_hat
    assert rc.l_hat == pytest.approx({11: 1.6 * 8})


def test_psi_required_for_exact_endpoint():
    g = build_grid([0.0], [1.0], [17])
    st_ = build_node_stencil(g, [15 / 16], 2, [[1.0]], [0.0])
    with pytest.raises(ValueError):
        row_coefficients(g, [15 / 16], st_)


def _untruncated_rows(g, p, a=0):
    rows = build_rows(g, p, 0.0, g.interior_indices(), a)
    clean = np.all(rows.overstep == int(Overstep.NONE), axis=1)
    return rows.nodes[clean]


def test_row_sum_one_without_truncation():
    p = builtin_problem("ProblemB", 8)
    g = build_grid(p.lo, p.hi, 41)
    sys_ = assemble_theta_system(g, p, 0, p.T, p.T, 1.0, p.g(g.coords()))
    rows = np.asarray(sys_.matrix.sum(axis=1)).ravel()
    clean = _untruncated_rows(g, p)
    assert clean.size > 0.5 * g.interior_indices().size
    np.testing.assert_allclose(rows[clean], 1.0, atol=1e-12)
    # truncated rows route boundary weight to the rhs: row sums exceed 1
    assert np.all(rows[sys_.interior] >= 1.0 - 1e-12)


def test_theta_zero_is_identity():
    p = builtin_problem("ProblemA", 4)
    g = build_grid(p.lo, p.hi, 21)
    u0 = p.g(g.coords())
    sys_ = assemble_theta_system(g, p, 1, 0.01, 0.01, 0.0, u0)
    assert (sys_.matrix - sp.identity(g.n_nodes)).count_nonzero() == 0


def test_boundary_rows_identity_with_psi():
    p = builtin_problem("ProblemA", 4)
    g = build_grid(p.lo, p.hi, 21)
    sys_ = assemble_theta_system(g, p, 0, 0.3, 0.3, 1.0, p.g(g.coords()))
    b = g.boundary_indices()
    M = sys_.matrix.tocsr()
    for j in b[::7]:
        row = M.getrow(j)
        assert row.nnz == 1 and row[0, j] == 1.0
    np.testing.assert_allclose(sys_.rhs[b], p.psi(0.3, g.coords()[b]))
    assert sys_.n == g.n_nodes
    assert sys_.row_offsets.size == g.n_nodes + 1


def test_fixed_policy_reproduces_howard_fixed_point():
    p = builtin_problem("ProblemB", 40)
    g = build_grid(p.lo, p.hi, 41)
    u0 = p.g(g.coords())
    st_ = howard_solve(g, p, p.T, p.T, 1.0, u0, make_solver("dense-lu"))
    full = np.zeros(g.n_nodes, dtype=int)
    full[g.interior_indices()] = st_.policy
    sys_ = assemble_theta_system(g, p, full, p.T, p.T, 1.0, u0)
    x = np.linalg.solve(sys_.matrix.toarray(), sys_.rhs)
    np.testing.assert_allclose(x, st_.u, atol=1e-10)


@pytest.mark.parametrize("name", ["ProblemA", "ProblemB"])
@pytest.mark.parametrize("theta", [1.0, 0.5])
def test_positive_type(name, theta):
    p = builtin_problem(name, 8)
    g = build_grid(p.lo, p.hi, 41)
    u0 = p.g(g.coords())
    dt = cfl_bound(g, p, theta) if theta < 1 else 0.1
    for a in (0, 5):
        ctx = ThetaContext.create(g, p, dt, dt, theta, u0)
        sys_ = assemble_theta_system(g, p, a, dt, dt, theta, u0, context=ctx)
        d = matrix_diagnostics(sys_)
        assert d.is_m_matrix_sign_pattern
        _, expl, c, _ = ctx.parts(a)
        if expl is not None:
            assert np.all(expl.lhat.data >= 0)
            assert np.min(1 - (1 - theta) * dt * (expl.diag - c)) >= -1e-12


def test_diagnostics_problem_b_81():
    p = builtin_problem("ProblemB", 40)
    g = build_grid(p.lo, p.hi, 81)
    sys_ = assemble_theta_system(g, p, 0, g.h, g.h, 1.0, p.g(g.coords()))
    d = matrix_diagnostics(sys_)
    assert d.is_m_matrix_sign_pattern
    assert d.min_row_sum >= 0.0
    assert d.dt_bound_estimate > 0


def test_diagnostics_identity():
    n = 9
    sys_ = SparseSystem(sp.identity(n, format="csr"), np.ones(n), 1.0, 0.1, np.ones(n, bool))
    d = matrix_diagnostics(sys_)
    assert d.is_m_matrix_sign_pattern
    assert d.min_row_sum == d.min_col_sum == 1.0
    assert d.dt_bound_estimate == np.inf


@pytest.mark.parametrize("name", ["ProblemA", "ProblemB"])
@pytest.mark.parametrize("N", [41, 81])
def test_column_sums_below_bound(name, N):
    p = builtin_problem(name, 8)
    g = build_grid(p.lo, p.hi, N)
    u0 = p.g(g.coords())
    dt = closed_form_column_bound(g.h, 0.0, p.P, p.dim)
    for a in (0, 3, 6):
        sys_ = assemble_theta_system(g, p, a, dt, dt, 1.0, u0)
        d = matrix_diagnostics(sys_)
        assert d.min_col_sum >= -1e-12
        assert d.min_row_sum >= -1e-12
        # the empirical bound is a valid step too
        if np.isfinite(d.dt_bound_estimate):
            dt2 = 0.999 * d.dt_bound_estimate
            s2 = assemble_theta_system(g, p, a, dt2, dt2, 1.0, u0)
            assert matrix_diagnostics(s2).min_col_sum >= -1e-12


def _operator_on(g, p, t, a, phi):
    from lisl_hjb.assembly import OperatorRows
    rows = build_rows(g, p, t, g.interior_indices(), a)
    op = OperatorRows.from_stencil_rows(rows, g.n_nodes)
    j = g.interior_indices()
    Lu = op.apply(phi) + op.boundary_rhs(lambda pts: p.exact(t, pts)) - op.diag * phi[j]
    return Lu, rows


def _exact_operator(x, t, alpha):
    k = 1.5 - t
    s1, s2, c1, c2 = np.sin(x[:, 0]), np.sin(x[:, 1]), np.cos(x[:, 0]), np.cos(x[:, 1])
    s = x[:, 0] + x[:, 1]
    diff = k * (-s1 * s2 + np.sin(2 * s) * c1 * c2)
    drift = k * (alpha[0] * c1 * s2 + alpha[1] * s1 * c2)
    return diff + drift


def test_consistency_orders():
    p = builtin_problem("ProblemA", 8)
    t, a = 0.2, 1
    clean_err, trunc_err = [], []
    for N in (41, 81, 161):
        g = build_grid(p.lo, p.hi, N)
        phi = p.exact(t, g.coords())
        Lu, rows = _operator_on(g, p, t, a, phi)
        ex = _exact_operator(g.coords()[g.interior_indices()], t, p.controls[a])
        err = np.abs(Lu - ex)
        over = rows.overstep
        clean = np.all(over == int(Overstep.NONE), axis=1)
        one = np.any((over == int(Overstep.ONE_SIDED_PLUS)) | (over == int(Overstep.ONE_SIDED_MINUS)),
                     axis=1) & ~np.any(over == int(Overstep.TWO_SIDED), axis=1)
        clean_err.append(err[clean].max())
        trunc_err.append(err[one].max())
    clean_rate = np.log2(clean_err[-2] / clean_err[-1])
    trunc_rate = np.log2(trunc_err[0] / trunc_err[-1]) / 2
    assert clean_rate >= 0.9
    assert trunc_rate >= 0.4


def test_row_cache_hits_for_static_coefficients():
    p = builtin_problem("ProblemB", 4)
    g = build_grid(p.lo, p.hi, 21)
    cache = RowCache()
    u0 = p.g(g.coords())
    for t in (0.1, 0.2):
        ctx = ThetaContext.create(g, p, t, 0.1, 1.0, u0, cache=cache)
        ctx.parts(0)
    assert cache.hits == 1 and cache.misses == 1
    tiny = RowCache(max_bytes=10)
    ctx = ThetaContext.create(g, p, 0.1, 0.1, 1.0, u0, cache=tiny)
    ctx.parts(0)
    assert tiny.get((0, ctx.scheme, ctx.mode, True), None, None) is None


def test_matrix_market_round_trip(tmp_path):
    p = builtin_problem("ProblemA", 4)
    g = build_grid(p.lo, p.hi, 11)
    sys_ = assemble_theta_system(g, p, 2, 0.5, 0.5, 1.0, p.g(g.coords()))
    path = export_matrix_market(sys_, tmp_path / "A.mtx")
    B = read_matrix_market(path)
    assert abs(B - sys_.matrix).max() < 1e-14
