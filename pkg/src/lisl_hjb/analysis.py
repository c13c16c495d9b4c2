"""Spectra of 1D LISL matrices and local Fourier analysis of Gauss-Seidel smoothing.

With constant diffusion ``sigma`` and mesh width ``dx`` a LISL step of length
``sigma / sqrt(dx)`` cells lands between grid offsets ``m`` and ``m + 1``::

    m = floor(sigma / sqrt(dx)),   gamma = m + 1 - sigma / sqrt(dx)

and the resulting (scaled) 1D matrix is ``gamma L^m_N + (1 - gamma) L^{m+1}_N``
where ``L^m_N`` has 2 on the diagonal and -1 at offsets ``+-m``.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.sparse as sp

#: symbol magnitudes below this are treated as singular
SYMBOL_TOL = 1e-14


@dataclass(frozen=True)
class LislStencil1D:
    N: int
    m: int
    gamma: float

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.m < 0:
            raise ValueError("m must be >= 0")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")


def lisl_parameters(sigma: float, dx: float) -> tuple[int, float]:
    """``(m, gamma)`` for a constant diffusion ``sigma`` on mesh width ``dx``."""
    if sigma <= 0 or dx <= 0:
        raise ValueError("sigma and dx must be positive")
    s = sigma / math.sqrt(dx)
    m = int(math.floor(s + 1e-12))
    gamma = m + 1 - s
    # snap integer ratios to gamma = 1 (no interpolation)
    return m, (float(gamma) if gamma < 1.0 - 1e-12 else 1.0)


def _band_matrix(N: int, m: int) -> sp.csr_matrix:
    """``L^m_N``: 2 on the diagonal, -1 at offsets ``+-m`` (entries off the grid dropped)."""
    if m == 0:
        return sp.csr_matrix((N, N))
    off = -np.ones(max(N - m, 0))
    diags, offsets = [2.0 * np.ones(N)], [0]
    if off.size:
        diags += [off, off]
        offsets += [m, -m]
    return sp.diags(diags, offsets, shape=(N, N), format="csr")


def build_lisl_matrix(N: int, m: int, gamma: float) -> sp.csr_matrix:
    """1D LISL matrix ``gamma L^m_N + (1 - gamma) L^{m+1}_N``.

    For ``m = 0`` the ``gamma`` part would couple a node to itself; it is
    dropped, giving ``(1 - gamma) L^1_N`` (experimental).
    """
    st = LislStencil1D(int(N), int(m), float(gamma))
    lo = _band_matrix(st.N, st.m) if st.m > 0 else sp.csr_matrix((st.N, st.N))
    hi = _band_matrix(st.N, st.m + 1)
    out = st.gamma * lo + (1.0 - st.gamma) * hi
    return sp.csr_matrix(out)


def lisl_model_2d(level: int, sigma: float, sigma2: Optional[float] = None) -> sp.csr_matrix:
    """2D constant-diffusion LISL model on ``(2^level + 1)^2`` unknowns (Kronecker sum).

    ``sigma`` and ``sigma2`` are the diffusion sizes along the two axes, with
    ``dx = 2^-level`` on the unit square.
    """
    n = 2**level + 1
    dx = 2.0**-level
    m1, g1 = lisl_parameters(sigma, dx)
    m2, g2 = lisl_parameters(sigma if sigma2 is None else sigma2, dx)
    L1 = build_lisl_matrix(n, m1, g1)
    L2 = build_lisl_matrix(n, m2, g2)
    eye = sp.identity(n, format="csr")
    return (sp.kron(eye, L1) + sp.kron(L2, eye)).tocsr()


def laplacian_2d(n: int) -> sp.csr_matrix:
    """Standard 5-point Dirichlet Laplacian on ``n x n`` interior unknowns."""
    L = _band_matrix(n, 1)
    eye = sp.identity(n, format="csr")
    return (sp.kron(eye, L) + sp.kron(L, eye)).tocsr()


# ---------------------------------------------------------------------------
# spectrum


def tridiag_eigen(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of ``L_n`` (2, -1): ``2 - 2 cos(k pi / (n + 1))`` with sine eigenvectors."""
    k = np.arange(1, n + 1)
    lam = 2.0 - 2.0 * np.cos(k * np.pi / (n + 1))
    i = np.arange(1, n + 1)
    V = np.sin(np.outer(i, k) * np.pi / (n + 1)) * np.sqrt(2.0 / (n + 1))
    return lam, V


def kronecker_eigen(N: int, m: int, gamma: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of ``L^m_N`` from the spectra of tridiagonal blocks.

    ``L^m_N`` decouples into ``m`` chains of nodes ``r, r + m, r + 2m, ...``;
    the chain through residue ``r`` is a copy of ``L_{ceil(N/m)}`` when
    ``r < N mod m`` and of ``L_{floor(N/m)}`` otherwise. Eigenvalues are
    returned in ascending order with unit eigenvectors as columns.
    """
    if gamma != 1.0:
        raise ValueError("no closed-form spectrum for gamma < 1")
    if m < 1:
        raise ValueError("m must be >= 1")
    if N < 1:
        raise ValueError("N must be >= 1")
    lams, vecs = [], []
    for r in range(min(m, N)):
        idx = np.arange(r, N, m)
        lam, V = tridiag_eigen(idx.size)
        full = np.zeros((N, idx.size))
        full[idx] = V
        lams.append(lam)
        vecs.append(full)
    lam = np.concatenate(lams)
    V = np.concatenate(vecs, axis=1)
    order = np.argsort(lam, kind="stable")
    return lam[order], V[:, order]


# ---------------------------------------------------------------------------
# local Fourier analysis


class SymbolMode(str, enum.Enum):
    AXIS_ALIGNED = "axis_aligned"
    SAME_SIGN = "general_diffusion_same_sign"
    OPPOSITE_SIGN = "general_diffusion_opposite_sign"


@dataclass(frozen=True)
class SmootherSymbolConfig:
    m1: int
    m2: int
    gamma1: float = 1.0
    gamma2: float = 1.0
    mode: SymbolMode = SymbolMode.AXIS_ALIGNED

    def __post_init__(self):
        for g in (self.gamma1, self.gamma2):
            if not 0.0 < g <= 1.0:
                raise ValueError(f"gamma must lie in (0, 1], got {g}")
        if self.m1 < 0 or self.m2 < 0:
            raise ValueError("stencil lengths must be >= 0")
        object.__setattr__(self, "mode", SymbolMode(self.mode))


def g_symbol(theta, gamma: float, m: int):
    """``gamma e^{i m theta} + (1 - gamma) e^{i (m + 1) theta}``."""
    theta = np.asarray(theta, dtype=float)
    return gamma * np.exp(1j * m * theta) + (1.0 - gamma) * np.exp(1j * (m + 1) * theta)


def smoother_symbols(config: SmootherSymbolConfig, t1, t2):
    """``(L+~, L-~)`` of the lexicographic Gauss-Seidel splitting at frequencies ``(t1, t2)``."""
    g1 = g_symbol(t1, config.gamma1, config.m1)
    g2 = g_symbol(t2, config.gamma2, config.m2)
    if config.mode is SymbolMode.AXIS_ALIGNED:
        return 4.0 - np.conj(g1) - np.conj(g2), g1 + g2
    if config.mode is SymbolMode.SAME_SIGN:
        return 2.0 - np.conj(g1) * np.conj(g2), g1 * g2
    return 2.0 - g1 * np.conj(g2), np.conj(g1) * g2


def amplification(config: SmootherSymbolConfig, t1, t2) -> np.ndarray:
    """``|S~| = |L-~ / L+~|``; raises on a singular symbol."""
    lp, lm = smoother_symbols(config, t1, t2)
    if np.any(np.abs(lp) < SYMBOL_TOL):
        raise ZeroDivisionError("smoother symbol L+ vanishes at a sample point")
    return np.abs(lm / lp)


def high_frequency_mask(t1, t2) -> np.ndarray:
    """Points of ``[-pi, pi)^2`` outside ``[-pi/2, pi/2)^2``."""
    t1, t2 = np.asarray(t1), np.asarray(t2)
    low = (t1 >= -np.pi / 2) & (t1 < np.pi / 2) & (t2 >= -np.pi / 2) & (t2 < np.pi / 2)
    inside = (t1 >= -np.pi) & (t1 < np.pi) & (t2 >= -np.pi) & (t2 < np.pi)
    return inside & ~low


def _sample_axis(res: int) -> np.ndarray:
    ax = -np.pi + 2 * np.pi * np.arange(res) / res
    # make sure the edges of the low-frequency box are sampled exactly
    return np.unique(np.concatenate([ax, [-np.pi / 2, np.pi / 2]]))


def smoothing_factor(config: SmootherSymbolConfig, sample_resolution: int = 256,
                     refine: int = 8, return_argmax: bool = False):
    """Local smoothing factor ``sup_{T^high} |S~|`` of lexicographic Gauss-Seidel.

    A uniform ``sample_resolution^2`` scan is followed by one pass on a grid
    ``refine`` times finer around the coarse maximiser.
    """
    if sample_resolution < 64:
        raise ValueError("sample_resolution must be >= 64")
    ax = _sample_axis(sample_resolution)
    T1, T2 = np.meshgrid(ax, ax, indexing="ij")
    mask = high_frequency_mask(T1, T2)
    vals = amplification(config, T1[mask], T2[mask])
    k = int(np.argmax(vals))
    best, b1, b2 = float(vals[k]), float(T1[mask][k]), float(T2[mask][k])
    if refine > 1:
        h = 2 * np.pi / sample_resolution
        loc = np.linspace(-h, h, 2 * refine + 1)
        R1, R2 = np.meshgrid(b1 + loc, b2 + loc, indexing="ij")
        # wrap onto [-pi, pi) so the periodic neighbourhood is searched
        R1 = (R1 + np.pi) % (2 * np.pi) - np.pi
        R2 = (R2 + np.pi) % (2 * np.pi) - np.pi
        rmask = high_frequency_mask(R1, R2)
        if np.any(rmask):
            rv = amplification(config, R1[rmask], R2[rmask])
            kk = int(np.argmax(rv))
            if rv[kk] > best:
                best, b1, b2 = float(rv[kk]), float(R1[rmask][kk]), float(R2[rmask][kk])
    if return_argmax:
        return best, (b1, b2)
    return best


def stencil_of(config: SmootherSymbolConfig) -> dict[tuple[int, int], float]:
    """Offset -> weight of the full operator whose splitting :func:`smoother_symbols` describes."""
    def taps(m, gamma, sign):
        out = {sign * m: gamma}
        out[sign * (m + 1)] = out.get(sign * (m + 1), 0.0) + (1.0 - gamma)
        return {k: v for k, v in out.items() if v != 0.0}

    st: dict[tuple[int, int], float] = {}

    def add(key, w):
        st[key] = st.get(key, 0.0) + w

    c = config
    if c.mode is SymbolMode.AXIS_ALIGNED:
        add((0, 0), 4.0)
        for s in (1, -1):
            for k, w in taps(c.m1, c.gamma1, s).items():
                add((k, 0), -w)
            for k, w in taps(c.m2, c.gamma2, s).items():
                add((0, k), -w)
        return st
    add((0, 0), 2.0)
    sgn2 = 1 if c.mode is SymbolMode.SAME_SIGN else -1
    for s in (1, -1):
        for k1, w1 in taps(c.m1, c.gamma1, s).items():
            for k2, w2 in taps(c.m2, c.gamma2, s * sgn2).items():
                add((k1, k2), -w1 * w2)
    return st


def stencil_symbol(stencil: dict[tuple[int, int], float], t1, t2):
    """``sum_k w_k e^{i k . theta}``."""
    out = 0.0
    for (k1, k2), w in stencil.items():
        out = out + w * np.exp(1j * (k1 * np.asarray(t1) + k2 * np.asarray(t2)))
    return out


def apply_periodic_stencil(stencil: dict[tuple[int, int], float], field: np.ndarray) -> np.ndarray:
    """Apply a constant stencil to a periodic 2D grid function (axis 0 is the first coordinate)."""
    out = np.zeros_like(field, dtype=complex)
    for (k1, k2), w in stencil.items():
        out += w * np.roll(field, shift=(-k1, -k2), axis=(0, 1))
    return out


def split_lexicographic(stencil: dict[tuple[int, int], float]):
    """Split into the Gauss-Seidel parts: offsets preceding the centre (plus the centre) and the rest.

    With the first coordinate running fastest, offset ``(k1, k2)`` precedes the
    centre when ``k2 < 0`` or ``k2 == 0 and k1 < 0``.
    """
    plus, minus = {}, {}
    for (k1, k2), w in stencil.items():
        if k2 < 0 or (k2 == 0 and k1 <= 0):
            plus[(k1, k2)] = w
        else:
            minus[(k1, k2)] = w
    return plus, minus


def smoothing_field(config: SmootherSymbolConfig, resolution: int = 256):
    """``(theta1, theta2, |S~|)`` on a full ``resolution^2`` grid over ``[-pi, pi)^2``."""
    ax = -np.pi + 2 * np.pi * np.arange(resolution) / resolution
    T1, T2 = np.meshgrid(ax, ax, indexing="ij")
    lp, lm = smoother_symbols(config, T1, T2)
    with np.errstate(divide="ignore", invalid="ignore"):
        S = np.where(np.abs(lp) < SYMBOL_TOL, np.nan, np.abs(lm) / np.abs(lp))
    return T1, T2, S


def write_field_csv(path, config: SmootherSymbolConfig, resolution: int = 256) -> Path:
    T1, T2, S = smoothing_field(config, resolution)
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta1", "theta2", "amplification", "high_frequency"])
        hf = high_frequency_mask(T1, T2)
        for a, b, s, h in zip(T1.ravel(), T2.ravel(), S.ravel(), hf.ravel()):
            w.writerow([f"{a:.6g}", f"{b:.6g}", f"{s:.6g}", int(h)])
    return path
