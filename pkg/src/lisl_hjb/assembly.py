"""Assembly of the theta-scheme system for a fixed control field.

For an interior node ``j`` and control ``alpha`` the discrete operator reads

    (L u)_j = sum_i lhat_ji u_i + bnd_j - S_j u_j,   S_j = sum_p (A_p + B_p) / (2 dx)

where ``bnd_j`` collects the Dirichlet data routed from truncated endpoints.
One theta step then solves ``A u^n = F`` with

    A_jj = 1 + theta dt (S_j - lhat_jj - c_j),   A_ji = -theta dt lhat_ji
    F_j  = u^{n-1}_j + (1 - theta) dt (L^{n-1} u^{n-1} + c u^{n-1})_j
           + dt f_j + theta dt bnd_j(t_n)

and boundary rows are identity rows carrying ``psi(t_n, x_j)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import scipy.io
import scipy.sparse as sp

from . import _kernels
from .grid import Grid
from .interp import interp_weights
from .problems import ControlProblem
from .stencil import BoundaryMode, SchemeId, StencilError, TruncatedStep

#: off-diagonal entries with magnitude below this are dropped after summation
DROP_TOL = 1e-15


@dataclass(frozen=True)
class RowCoefficients:
    l_hat: dict[int, float]
    boundary_rhs: float
    diag_sum: float


def row_coefficients(grid: Grid, x, stencils: list[TruncatedStep],
                     psi: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                     exact_boundary: bool = True) -> RowCoefficients:
    """Reference (per-node) construction of the ``lhat`` row.

    ``psi`` maps an ``(n, d)`` array of boundary points to Dirichlet values;
    it is needed whenever an endpoint carries the ``exact``, ``const`` or
    ``linear`` treatment. With ``exact_boundary=False`` the ``const`` and
    ``linear`` endpoints read the boundary value by interpolating nodal values
    at the exit point instead.
    """
    x = np.asarray(x, dtype=float)
    inv2h = 1.0 / (2.0 * grid.h)
    l_hat: dict[int, float] = {}
    bnd = 0.0
    diag = 0.0

    def add_interp(point, coef):
        try:
            st = interp_weights(grid, point)
        except ValueError as exc:
            raise RuntimeError(f"truncated endpoint {point.tolist()} left the domain") from exc
        for i, w in st.entries:
            l_hat[i] = l_hat.get(i, 0.0) + coef * w

    def boundary_value(point):
        if psi is None:
            raise ValueError("psi is required for boundary-routed endpoints")
        return float(np.asarray(psi(point[None, :])).reshape(-1)[0])

    for st in stencils:
        diag += (st.A + st.B) * inv2h
        sides = ((st.y_plus, st.y_hat_plus, st.mu_plus, st.A, st.plus_treatment),
                 (st.y_minus, st.y_hat_minus, st.mu_minus, st.B, st.minus_treatment))
        for y, y_hat, mu, weight, how in sides:
            if not np.any(y):
                continue
            coef = weight * inv2h
            point = x + y_hat
            if how == "interp":
                add_interp(point, coef)
            elif how == "exact":
                bnd += coef * boundary_value(point)
            elif how in ("const", "linear"):
                scale = 1.0
                if how == "linear":
                    scale = 1.0 / mu
                    diag += coef * (1.0 - mu) / mu
                if exact_boundary:
                    bnd += coef * scale * boundary_value(point)
                else:
                    add_interp(point, coef * scale)
            else:
                raise ValueError(f"unknown endpoint treatment {how!r}")
    return RowCoefficients(l_hat, bnd, diag)


# ---------------------------------------------------------------------------
# batched rows


@dataclass(frozen=True, eq=False)
class StencilRows:
    """Operator rows of a node subset for one control field.

    ``cols`` / ``vals`` hold the ``lhat`` entries (padding slots point at the
    node itself with value 0); ``diag`` is ``S_j``; boundary-routed endpoints
    are kept as points ``bpts`` with coefficients ``bcoef``.
    """

    nodes: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    diag: np.ndarray
    bpts: np.ndarray
    bcoef: np.ndarray
    A: np.ndarray
    B: np.ndarray
    mu_plus: np.ndarray
    mu_minus: np.ndarray
    overstep: np.ndarray

    def apply(self, u: np.ndarray) -> np.ndarray:
        """``sum_i lhat_ji u_i`` for every row."""
        return _kernels.gather_apply(self.cols, self.vals, u)

    def self_weight(self) -> np.ndarray:
        return np.sum(np.where(self.cols == self.nodes[:, None], self.vals, 0.0), axis=1)

    def boundary_rhs(self, psi_t: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        out = np.zeros(self.nodes.size)
        mask = self.bcoef != 0.0
        if np.any(mask):
            vals = np.asarray(psi_t(self.bpts[mask]), dtype=float)
            contrib = np.zeros(self.bcoef.shape)
            contrib[mask] = self.bcoef[mask] * vals
            out = contrib.sum(axis=1)
        return out


def _control_groups(alpha):
    alpha = np.asarray(alpha)
    for a in np.unique(alpha):
        yield int(a), alpha == a


def eval_field(problem: ControlProblem, t: float, X: np.ndarray, alpha, name: str) -> np.ndarray:
    """Evaluate coefficient ``name`` at points ``X`` under a scalar or per-point control."""
    fn = getattr(problem, name)
    d, P, n = problem.dim, problem.P, X.shape[0]
    shape = {"sigma": (n, d, P), "b": (n, d), "c": (n,), "f": (n,)}[name]
    if np.ndim(alpha) == 0:
        return np.asarray(fn(t, X, problem.controls[int(alpha)]), dtype=float).reshape(shape)
    out = np.empty(shape)
    for a, mask in _control_groups(alpha):
        out[mask] = np.asarray(fn(t, X[mask], problem.controls[a]), dtype=float).reshape(
            (int(mask.sum()),) + shape[1:])
    return out


def step_vectors(scheme, sigma: np.ndarray, b: np.ndarray, h: float):
    """Vectorised LISL step pairs: ``(Yp, Ym, is_drift)`` with ``Yp`` of shape ``(n, M, d)``."""
    scheme = SchemeId.parse(scheme)
    n, d, P = sigma.shape
    k = np.sqrt(h)
    diff = k * np.transpose(sigma, (0, 2, 1))  # (n, P, d)
    drift = h * b[:, None, :]
    if P == 0:
        return drift.copy(), drift.copy(), np.array([True])
    if scheme is SchemeId.SCHEME1:
        shift = drift / P
        return diff + shift, -diff + shift, np.zeros(P, dtype=bool)
    if scheme is SchemeId.SCHEME2:
        Yp = np.concatenate([diff, drift], axis=1)
        Ym = np.concatenate([-diff, drift], axis=1)
        return Yp, Ym, np.r_[np.zeros(P, dtype=bool), True]
    Yp, Ym = diff.copy(), -diff.copy()
    Yp[:, -1] += drift[:, 0]
    Ym[:, -1] += drift[:, 0]
    return Yp, Ym, np.zeros(P, dtype=bool)


def build_rows(grid: Grid, problem: ControlProblem, t: float, nodes: np.ndarray, alpha,
               scheme=SchemeId.SCHEME2, mode=BoundaryMode.TRUNCATE,
               use_exact_boundary: bool = True, X: Optional[np.ndarray] = None,
               sigma: Optional[np.ndarray] = None, b: Optional[np.ndarray] = None) -> StencilRows:
    """Stencil rows of ``nodes`` at time ``t`` for a scalar or per-node control.

    ``sigma`` and ``b`` may be passed when already evaluated at ``X``.
    """
    scheme = SchemeId.parse(scheme)
    mode = BoundaryMode.parse(mode)
    nodes = np.asarray(nodes, dtype=np.int64)
    if X is None:
        X = grid.coords()[nodes]
    if sigma is None:
        sigma = eval_field(problem, t, X, alpha, "sigma")
    if b is None:
        b = eval_field(problem, t, X, alpha, "b")
    Yp, Ym, is_drift = step_vectors(scheme, sigma, b, grid.h)
    out = _kernels.stencil_rows(
        np.ascontiguousarray(X), nodes, np.ascontiguousarray(Yp), np.ascontiguousarray(Ym),
        is_drift, grid.lo, grid.hi, grid.dx, np.asarray(grid.shape, dtype=np.int64),
        grid.strides, grid.h, scheme is SchemeId.SCHEME2, int(mode), bool(use_exact_boundary))
    cols, vals, diag, bpts, bcoef, A, B, mup, mum, over, err = out
    bad = np.flatnonzero(err)
    if bad.size:
        r = bad[0]
        where = X[r].tolist()
        if err[r] == _kernels.ERR_SCHEME:
            raise StencilError(f"{scheme.name} stencil oversteps at x={where}; "
                               "only Scheme 2 has consistent truncation weights")
        raise StencilError(f"two-sided overstep at x={where} requires exact boundary values")
    return StencilRows(nodes, cols, vals, diag, bpts, bcoef, A, B, mup, mum, over)


# ---------------------------------------------------------------------------
# theta system


@dataclass(frozen=True, eq=False)
class SparseSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    theta: float = 1.0
    dt: float = 1.0
    interior: Optional[np.ndarray] = None
    cfl_violation: Optional[float] = None
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def row_offsets(self) -> np.ndarray:
        return self.matrix.indptr

    @property
    def col_indices(self) -> np.ndarray:
        return self.matrix.indices

    @property
    def values(self) -> np.ndarray:
        return self.matrix.data


@dataclass(frozen=True, eq=False)
class OperatorRows:
    """Compact form of :class:`StencilRows`: ``lhat`` as a CSR block plus boundary terms."""

    nodes: np.ndarray
    lhat: sp.csr_matrix
    diag: np.ndarray
    b_row: np.ndarray
    b_pts: np.ndarray
    b_coef: np.ndarray

    @classmethod
    def from_stencil_rows(cls, rows: StencilRows, n_nodes: int) -> "OperatorRows":
        n, K = rows.cols.shape
        indptr = np.arange(0, n * K + 1, K, dtype=np.int64)
        lhat = sp.csr_matrix((rows.vals.ravel(), rows.cols.ravel(), indptr), shape=(n, n_nodes))
        lhat.sum_duplicates()
        lhat.data[np.abs(lhat.data) < DROP_TOL] = 0.0
        lhat.eliminate_zeros()
        r, slot = np.nonzero(rows.bcoef)
        return cls(rows.nodes, lhat, rows.diag, r, rows.bpts[r, slot], rows.bcoef[r, slot])

    @property
    def nbytes(self) -> int:
        m = self.lhat
        return int(m.data.nbytes + m.indices.nbytes + m.indptr.nbytes + self.diag.nbytes
                   + self.b_row.nbytes + self.b_pts.nbytes + self.b_coef.nbytes)

    def apply(self, u: np.ndarray) -> np.ndarray:
        return self.lhat @ u

    def self_weight(self) -> np.ndarray:
        return np.asarray(self.lhat[:, self.nodes].diagonal()).ravel()

    def boundary_rhs(self, psi_t: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        n = self.nodes.size
        if self.b_row.size == 0:
            return np.zeros(n)
        vals = np.asarray(psi_t(self.b_pts), dtype=float)
        return np.bincount(self.b_row, weights=self.b_coef * vals, minlength=n)


class RowCache:
    """Per-control cache of operator rows, reused while ``sigma`` and ``b`` are unchanged.

    Entries are keyed by control index and validated by exact comparison of
    the freshly evaluated coefficient arrays, so time-dependent coefficients
    simply miss. Nothing is stored once ``max_bytes`` is reached.
    """

    def __init__(self, max_bytes: float = 1.5e9):
        self.max_bytes = max_bytes
        self._store: dict = {}
        self._bytes = 0
        self.hits = 0
        self.misses = 0

    def get(self, key, sigma, b) -> Optional[OperatorRows]:
        entry = self._store.get(key)
        if entry is not None and np.array_equal(entry[0], sigma) and np.array_equal(entry[1], b):
            self.hits += 1
            return entry[2]
        self.misses += 1
        return None

    def put(self, key, sigma, b, rows: OperatorRows) -> None:
        old = self._store.pop(key, None)
        if old is not None:
            self._bytes -= old[3]
        size = rows.nbytes + sigma.nbytes + b.nbytes
        if self._bytes + size <= self.max_bytes:
            self._store[key] = (sigma, b, rows, size)
            self._bytes += size


@dataclass(eq=False)
class ThetaContext:
    """Everything about one time step that does not depend on the control choice.

    Per-control right-hand sides are memoised, so repeated residual
    evaluations inside policy iteration only redo the matrix-vector part.
    """

    grid: Grid
    problem: ControlProblem
    t_n: float
    dt: float
    theta: float
    u_prev: np.ndarray
    scheme: SchemeId = SchemeId.SCHEME2
    mode: BoundaryMode = BoundaryMode.TRUNCATE
    use_exact_boundary: bool = True
    interior: np.ndarray = None
    X: np.ndarray = None
    cache: Optional[RowCache] = None
    _parts: dict = field(default_factory=dict)

    @classmethod
    def create(cls, grid, problem, t_n, dt, theta, u_prev, scheme=SchemeId.SCHEME2,
               mode=BoundaryMode.TRUNCATE, use_exact_boundary=True, X_all=None,
               cache: Optional[RowCache] = None):
        if dt <= 0:
            raise ValueError("dt must be positive")
        if not 0.0 <= theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")
        u_prev = np.asarray(u_prev, dtype=float)
        if u_prev.shape != (grid.n_nodes,):
            raise ValueError("u_prev needs one value per node")
        interior = grid.interior_indices()
        X_all = grid.coords() if X_all is None else X_all
        return cls(grid, problem, float(t_n), float(dt), float(theta), u_prev,
                   SchemeId.parse(scheme), BoundaryMode.parse(mode), bool(use_exact_boundary),
                   interior, X_all[interior], cache)

    @property
    def t_prev(self) -> float:
        return self.t_n - self.dt

    @property
    def t_mid(self) -> float:
        return self.t_prev + self.theta * self.dt

    def rows(self, t: float, alpha) -> OperatorRows:
        sigma = eval_field(self.problem, t, self.X, alpha, "sigma")
        b = eval_field(self.problem, t, self.X, alpha, "b")
        key = None
        if self.cache is not None and np.ndim(alpha) == 0:
            key = (int(alpha), self.scheme, self.mode, self.use_exact_boundary)
            hit = self.cache.get(key, sigma, b)
            if hit is not None:
                return hit
        raw = build_rows(self.grid, self.problem, t, self.interior, alpha, self.scheme,
                         self.mode, self.use_exact_boundary, X=self.X, sigma=sigma, b=b)
        rows = OperatorRows.from_stencil_rows(raw, self.grid.n_nodes)
        if key is not None:
            self.cache.put(key, sigma, b, rows)
        return rows

    def psi_at(self, t: float):
        return lambda pts: self.problem.psi(t, pts)

    def parts(self, alpha):
        """``(implicit rows, explicit rows, c, interior rhs)`` for control ``alpha``."""
        key = int(alpha) if np.ndim(alpha) == 0 else None
        if key is not None and key in self._parts:
            return self._parts[key]
        th, dt = self.theta, self.dt
        c = eval_field(self.problem, self.t_mid, self.X, alpha, "c")
        f = eval_field(self.problem, self.t_mid, self.X, alpha, "f")
        up = self.u_prev[self.interior]
        rhs = up + dt * f
        expl_rows = None
        if th < 1.0:
            expl_rows = self.rows(self.t_prev, alpha)
            Lu = (expl_rows.apply(self.u_prev) + expl_rows.boundary_rhs(self.psi_at(self.t_prev))
                  - expl_rows.diag * up)
            rhs = rhs + (1.0 - th) * dt * (Lu + c * up)
        impl_rows = None
        if th > 0.0:
            impl_rows = self.rows(self.t_n, alpha)
            rhs = rhs + th * dt * impl_rows.boundary_rhs(self.psi_at(self.t_n))
        out = (impl_rows, expl_rows, c, rhs)
        if key is not None:
            self._parts[key] = out
        return out

    def residual(self, alpha, u: np.ndarray) -> np.ndarray:
        """Interior residual ``(A^alpha u - F^alpha)_j`` for a scalar or per-node control."""
        impl, _, c, rhs = self.parts(alpha)
        uj = u[self.interior]
        Au = uj.copy()
        if impl is not None:
            Au += self.theta * self.dt * ((impl.diag - c) * uj - impl.apply(u))
        return Au - rhs


def _cfl_from_rows(rows: Optional[OperatorRows], c: np.ndarray, theta: float) -> float:
    bound = np.inf
    if theta < 1.0 and rows is not None:
        denom = (1.0 - theta) * (rows.diag - c)
        pos = denom > 0
        if np.any(pos):
            bound = min(bound, float(np.min(1.0 / denom[pos])))
    cplus = np.maximum(c, 0.0)
    if theta > 0.0 and np.any(cplus > 0):
        bound = min(bound, float(np.min(1.0 / (theta * cplus[cplus > 0]))))
    return bound


def assemble_theta_system(grid: Grid, problem: ControlProblem, control_vector, t_n: float,
                          dt: float, theta: float, u_prev, scheme=SchemeId.SCHEME2,
                          mode=BoundaryMode.TRUNCATE, use_exact_boundary: bool = True,
                          context: Optional[ThetaContext] = None) -> SparseSystem:
    """Matrix and right-hand side of one theta step at a fixed control field.

    ``control_vector`` holds one control index per node (boundary entries are
    ignored) or a single index used everywhere. If the explicit part violates
    the positivity CFL the system is still assembled and the ratio
    ``dt / dt_max`` is stored in ``cfl_violation``.
    """
    ctx = context or ThetaContext.create(grid, problem, t_n, dt, theta, u_prev, scheme, mode,
                                         use_exact_boundary)
    alpha = np.asarray(control_vector)
    if alpha.ndim:
        alpha = alpha[ctx.interior]
    impl, expl, c, rhs_int = ctx.parts(alpha)
    n = grid.n_nodes
    interior = ctx.interior
    boundary = grid.boundary_indices()
    th = ctx.theta
    diag = np.ones(interior.size)
    if impl is not None:
        diag = 1.0 + th * ctx.dt * (impl.diag - c)
        L = impl.lhat.tocoo()
        r = np.concatenate([interior[L.row], interior, boundary])
        cc = np.concatenate([L.col, interior, boundary])
        v = np.concatenate([-th * ctx.dt * L.data, diag, np.ones(boundary.size)])
    else:
        r = np.concatenate([interior, boundary])
        cc = r
        v = np.ones(r.size)
    mat = sp.coo_matrix((v, (r, cc)), shape=(n, n)).tocsr()
    mat.sum_duplicates()
    rows_of = np.repeat(np.arange(n), np.diff(mat.indptr))
    keep = (np.abs(mat.data) >= DROP_TOL) | (rows_of == mat.indices)
    if not np.all(keep):
        mat.data[~keep] = 0.0
        mat.eliminate_zeros()
    mat.sort_indices()
    rhs = np.empty(n)
    rhs[interior] = rhs_int
    rhs[boundary] = problem.psi(ctx.t_n, grid.coords()[boundary])
    cfl = _cfl_from_rows(expl, c, th)
    violation = ctx.dt / cfl if ctx.dt > cfl else None
    interior_mask = np.zeros(n, dtype=bool)
    interior_mask[interior] = True
    return SparseSystem(mat, rhs, th, ctx.dt, interior_mask, violation,
                        {"t_n": ctx.t_n, "cfl_bound": cfl})


# ---------------------------------------------------------------------------
# diagnostics


@dataclass(frozen=True)
class MatrixDiagnostics:
    is_m_matrix_sign_pattern: bool
    min_row_sum: float
    min_col_sum: float
    dt_bound_estimate: float


def _interior_block(sys_: SparseSystem) -> sp.csr_matrix:
    if sys_.interior is None:
        return sys_.matrix.tocsr()
    idx = np.flatnonzero(sys_.interior)
    return sys_.matrix.tocsr()[idx][:, idx]


def matrix_diagnostics(sys_: SparseSystem, dt_max: float = 1e3, bisect_iters: int = 80) -> MatrixDiagnostics:
    """Sign pattern, row/column sums and the largest ``dt`` keeping column sums nonnegative.

    Sums are taken over the interior-interior block (boundary rows are
    identity rows and carry no scheme information). The bisection rescales
    the stored operator ``K = (A - I) / (theta dt)`` as ``I + s K``; steps
    above ``dt_max`` are reported as ``inf``.
    """
    A = _interior_block(sys_)
    d = A.diagonal()
    off = A - sp.diags(d)
    sign_ok = bool(np.all(d > 0) and (off.nnz == 0 or off.data.max() <= 0.0))
    row = np.asarray(A.sum(axis=1)).ravel()
    col = np.asarray(A.sum(axis=0)).ravel()
    min_row = float(row.min()) if row.size else 0.0
    min_col = float(col.min()) if col.size else 0.0
    scale = sys_.theta * sys_.dt
    if A.shape[0] == 0 or scale == 0:
        return MatrixDiagnostics(sign_ok, min_row, min_col, np.inf)
    Kcol = (col - 1.0) / scale
    if np.all(Kcol >= 0):
        bound = np.inf
    else:
        lo, hi = 0.0, dt_max
        if np.min(1.0 + hi * Kcol) >= 0:
            bound = np.inf
        else:
            for _ in range(bisect_iters):
                mid = 0.5 * (lo + hi)
                if np.min(1.0 + mid * Kcol) >= 0:
                    lo = mid
                else:
                    hi = mid
            bound = lo / sys_.theta
    return MatrixDiagnostics(sign_ok, min_row, min_col, bound)


def closed_form_column_bound(dx: float, c_plus_sup: float, P: int, dim: int) -> float:
    """Analytic column-sum bound ``dx / (sup c+ + (M - 1)(P + 1))`` with ``M = 3^d``."""
    return dx / (c_plus_sup + (3**dim - 1) * (P + 1))


def export_matrix_market(sys_: SparseSystem, path) -> Path:
    path = Path(path)
    scipy.io.mmwrite(str(path), sys_.matrix)
    return path.with_suffix(".mtx") if path.suffix != ".mtx" else path
