import csv

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lisl_hjb.analysis import (SmootherSymbolConfig, SymbolMode, amplification, apply_periodic_stencil,
                               build_lisl_matrix, high_frequency_mask, kronecker_eigen,
                               laplacian_2d, lisl_model_2d, lisl_parameters, smoother_symbols,
                               smoothing_factor, split_lexicographic, stencil_of, stencil_symbol,
                               tridiag_eigen, write_field_csv)


def test_m1_is_tridiagonal():
    L = build_lisl_matrix(9, 1, 1.0).toarray()
    ref = 2 * np.eye(9) - np.eye(9, k=1) - np.eye(9, k=-1)
    np.testing.assert_array_equal(L, ref)


def test_interpolated_band_pattern():
    L = build_lisl_matrix(7, 2, 0.5).toarray()
    ref = 2 * np.eye(7)
    for k, w in ((2, 0.5), (3, 0.5)):
        ref -= w * (np.eye(7, k=k) + np.eye(7, k=-k))
    np.testing.assert_allclose(L, ref)


@pytest.mark.parametrize("N,m,gamma", [(20, 3, 0.3), (11, 1, 0.9), (16, 5, 1.0)])
def test_convex_combination(N, m, gamma):
    L = build_lisl_matrix(N, m, gamma).toarray()
    ref = gamma * build_lisl_matrix(N, m, 1.0).toarray() + (1 - gamma) * build_lisl_matrix(N, m + 1, 1.0).toarray()
    np.testing.assert_allclose(L, ref)


def test_m0_experimental():
    L = build_lisl_matrix(6, 0, 0.25).toarray()
    np.testing.assert_allclose(L, 0.75 * build_lisl_matrix(6, 1, 1.0).toarray())


@pytest.mark.parametrize("sigma,level,m,gamma", [(2.0, 8, 32, 1.0), (np.sqrt(5), 8, 35, 36 - 16 * np.sqrt(5)),
                                                 (0.5, 4, 2, 1.0)])
def test_lisl_parameters(sigma, level, m, gamma):
    mm, gg = lisl_parameters(sigma, 2.0**-level)
    assert mm == m and gg == pytest.approx(gamma)


def test_model_sizes():
    assert lisl_model_2d(5, 2.0).shape == (33**2, 33**2)
    A = laplacian_2d(5)
    assert A.shape == (25, 25) and A.diagonal().max() == 4.0


def test_tridiag_spectrum():
    lam, V = tridiag_eigen(10)
    L = build_lisl_matrix(10, 1, 1.0).toarray()
    np.testing.assert_allclose(L @ V, V * lam, atol=1e-13)


def test_kronecker_m1_classical():
    lam, _ = kronecker_eigen(15, 1)
    np.testing.assert_allclose(lam, 2 - 2 * np.cos(np.arange(1, 16) * np.pi / 16), atol=1e-14)


def test_kronecker_block_multiplicity():
    lam, _ = kronecker_eigen(12, 3)
    base, _ = tridiag_eigen(4)
    np.testing.assert_allclose(lam, np.sort(np.repeat(base, 3)), atol=1e-13)
    dense = np.linalg.eigvalsh(build_lisl_matrix(12, 3, 1.0).toarray())
    np.testing.assert_allclose(lam, dense, atol=1e-12)


@pytest.mark.parametrize("N", [1, 7, 12, 31, 64])
@pytest.mark.parametrize("m", [1, 2, 3, 4, 5, 6])
def test_kronecker_matches_dense(N, m):
    lam, V = kronecker_eigen(N, m)
    L = build_lisl_matrix(N, m, 1.0).toarray()
    np.testing.assert_allclose(lam, np.linalg.eigvalsh(L), atol=1e-10)
    assert np.abs(L @ V - V * lam).max() < 1e-10
    np.testing.assert_allclose(V.T @ V, np.eye(N), atol=1e-10)


def test_kronecker_rejects_interpolation():
    with pytest.raises(ValueError):
        kronecker_eigen(10, 2, 0.5)
    with pytest.raises(ValueError):
        kronecker_eigen(10, 0)


def test_smoothing_factor_classical():
    assert smoothing_factor(SmootherSymbolConfig(1, 1)) == pytest.approx(0.5, abs=0.01)


def test_smoothing_factor_lisl_analytic():
    # |g1 + g2| <= 2 <= |4 - conj(g1) - conj(g2)|, with equality at theta = (0, 2 pi / 3)
    cfg = SmootherSymbolConfig(9, 3, 0.5, 1.0)
    peak = amplification(cfg, np.array([0.0]), np.array([2 * np.pi / 3]))[0]
    assert peak == pytest.approx(1.0, abs=1e-14)
    assert smoothing_factor(cfg) == pytest.approx(1.0, abs=1e-4)


@given(st.integers(0, 12), st.integers(0, 12), st.floats(0.05, 1.0), st.floats(0.05, 1.0),
       st.floats(-np.pi, np.pi), st.floats(-np.pi, np.pi))
def test_amplification_bounded_by_one(m1, m2, g1, g2, t1, t2):
    cfg = SmootherSymbolConfig(m1, m2, g1, g2)
    assert amplification(cfg, np.array([t1]), np.array([t2]))[0] <= 1.0 + 1e-12


def test_smoothing_factor_degrades_with_width():
    wide = smoothing_factor(SmootherSymbolConfig(20, 20))
    assert wide > smoothing_factor(SmootherSymbolConfig(1, 1))
    assert wide > 0.95


@pytest.mark.parametrize("cfg", [SmootherSymbolConfig(1, 1), SmootherSymbolConfig(9, 3, 0.5, 1.0)])
def test_sampling_resolution_invariance(cfg):
    assert abs(smoothing_factor(cfg, 256) - smoothing_factor(cfg, 512)) <= 1e-3


def test_low_resolution_rejected():
    with pytest.raises(ValueError):
        smoothing_factor(SmootherSymbolConfig(1, 1), 32)


def test_high_frequency_mask():
    t = np.array([0.0, np.pi / 2, -np.pi / 2, -np.pi, 3.0])
    np.testing.assert_array_equal(high_frequency_mask(t, np.zeros(5)), [False, True, False, True, True])


configs = st.builds(SmootherSymbolConfig, st.integers(1, 6), st.integers(1, 6),
                    st.floats(0.05, 1.0), st.floats(0.05, 1.0), st.sampled_from(list(SymbolMode)))


@given(configs, st.integers(0, 31), st.integers(0, 31))
def test_symbol_identity(cfg, k1, k2):
    n = 32
    t1, t2 = 2 * np.pi * k1 / n, 2 * np.pi * k2 / n
    x1, x2 = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    field = np.exp(1j * (t1 * x1 + t2 * x2))
    stencil = stencil_of(cfg)
    applied = apply_periodic_stencil(stencil, field)
    np.testing.assert_allclose(applied, stencil_symbol(stencil, t1, t2) * field, atol=1e-12)
    # taps at m >= 1 sit strictly off the centre, so the lexicographic split is the symbolic one
    plus, minus = split_lexicographic(stencil)
    lp, lm = smoother_symbols(cfg, t1, t2)
    assert abs(stencil_symbol(plus, t1, t2) - lp) < 1e-12
    assert abs(-stencil_symbol(minus, t1, t2) - lm) < 1e-12


def test_field_csv(tmp_path):
    path = write_field_csv(tmp_path / "f.csv", SmootherSymbolConfig(1, 1), 64)
    with path.open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["theta1", "theta2", "amplification", "high_frequency"]
    assert len(rows) == 64 * 64 + 1


def test_symbol_identity_degenerate_m0():
    cfg = SmootherSymbolConfig(0, 2, 0.4, 1.0)
    stencil = stencil_of(cfg)
    n = 16
    x1, x2 = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    t1, t2 = 2 * np.pi * 3 / n, 2 * np.pi * 5 / n
    field = np.exp(1j * (t1 * x1 + t2 * x2))
    np.testing.assert_allclose(apply_periodic_stencil(stencil, field),
                               stencil_symbol(stencil, t1, t2) * field, atol=1e-12)
