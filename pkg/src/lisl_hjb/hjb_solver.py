"""Theta-scheme time marching with Howard policy iteration.

Each time step solves the discrete max-form problem

    max_alpha ( A^alpha u - F^alpha )_j = 0   for every interior node j

by alternating policy evaluation (a linear solve at a fixed control field)
and policy improvement (per-node linear search over the control set). For
``theta = 0`` the matrix is the identity and the step reduces to
``u_j = min_alpha F^alpha_j``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .assembly import RowCache, ThetaContext, _cfl_from_rows, assemble_theta_system, eval_field
from .grid import Grid
from .linsolve import LinearSolver, SolveReport, make_solver
from .problems import ControlProblem
from .stencil import BoundaryMode, SchemeId

log = logging.getLogger(__name__)

#: controls whose residual is within this (relative) margin of the best count as tied
TIE_TOL = 1e-12
#: runs whose solution exceeds this magnitude are declared diverged
DIVERGENCE_THRESHOLD = 1e10


@dataclass(frozen=True, eq=False)
class TimeGrid:
    t_points: np.ndarray
    dt_max: float

    def __post_init__(self):
        t = np.asarray(self.t_points, dtype=float)
        if t.ndim != 1 or t.size < 2 or t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise ValueError("t_points must increase strictly from 0")
        if np.any(np.diff(t) > self.dt_max * (1 + 1e-12)):
            raise ValueError("a step exceeds dt_max")
        object.__setattr__(self, "t_points", t)

    @classmethod
    def uniform(cls, T: float, dt: float) -> "TimeGrid":
        """Steps of size ``dt``; the last one is clipped so the grid ends at ``T``."""
        if T <= 0 or dt <= 0:
            raise ValueError("T and dt must be positive")
        n = max(1, math.ceil(T / dt - 1e-9))
        t = np.minimum(np.arange(n + 1) * dt, T)
        t[-1] = T
        t = t[np.r_[True, np.diff(t) > 0]]
        return cls(t, float(dt))

    @property
    def T(self) -> float:
        return float(self.t_points[-1])

    @property
    def n_steps(self) -> int:
        return self.t_points.size - 1

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.t_points)


def cfl_bound(grid: Grid, problem: ControlProblem, theta: float, scheme=SchemeId.SCHEME2,
              with_truncation: bool = True, t: float = 0.0) -> float:
    """Largest ``dt`` keeping all theta-scheme coefficients nonnegative (``inf`` allowed).

    Uses ``(1 - theta) dt (sum_p (A_p + B_p) / (2 dx) - c) <= 1`` and
    ``theta dt c <= 1`` over all interior nodes and controls. Without
    truncation the weights are fixed at ``A = B = 1``.
    """
    ctx = ThetaContext.create(grid, problem, t + 1.0, 1.0, theta, np.zeros(grid.n_nodes),
                              scheme, BoundaryMode.TRUNCATE if with_truncation
                              else BoundaryMode.CONST_EXTRAP)
    bound = np.inf
    for a in range(problem.n_alpha):
        c = eval_field(problem, t, ctx.X, a, "c")
        if theta >= 1.0 and np.all(c <= 0):
            continue
        rows = ctx.rows(t, a) if theta < 1.0 else None
        bound = min(bound, _cfl_from_rows(rows, c, theta))
    return bound


@dataclass
class PolicyIterationState:
    u: np.ndarray
    policy: np.ndarray
    nonlinear_residual: float
    iterations: int
    residual_history: list[float] = field(default_factory=list)
    linear_reports: list[SolveReport] = field(default_factory=list)
    converged: bool = True
    cfl_violation: Optional[float] = None

    @property
    def linear_iterations(self) -> int:
        return int(sum(r.iterations for r in self.linear_reports))


def improve_policy(ctx: ThetaContext, u: np.ndarray, policy: Optional[np.ndarray] = None,
                   tie_tol: float = TIE_TOL):
    """Per-node argmax of ``A^alpha u - F^alpha`` over the controls.

    The current control is kept when it is tied with the best; otherwise the
    lowest tied index wins. Returns ``(new_policy, max residual per node)``.
    """
    n_alpha = ctx.problem.n_alpha
    R = np.empty((n_alpha, ctx.interior.size))
    for a in range(n_alpha):
        R[a] = ctx.residual(a, u)
    best = R.max(axis=0)
    scale = tie_tol * (1.0 + np.abs(best))
    tied = R >= best - scale
    new = np.argmax(tied, axis=0)
    if policy is not None:
        keep = tied[policy, np.arange(policy.size)]
        new = np.where(keep, policy, new)
    return new.astype(np.int64), best


def _explicit_step(ctx: ThetaContext):
    best = None
    arg = None
    cfl = np.inf
    for a in range(ctx.problem.n_alpha):
        _, expl, c, rhs = ctx.parts(a)
        cfl = min(cfl, _cfl_from_rows(expl, c, ctx.theta))
        if best is None:
            best, arg = rhs.copy(), np.zeros(rhs.size, dtype=np.int64)
        else:
            better = rhs < best
            best[better] = rhs[better]
            arg[better] = a
    u = ctx.u_prev.copy()
    u[ctx.interior] = best
    boundary = ctx.grid.boundary_indices()
    u[boundary] = ctx.problem.psi(ctx.t_n, ctx.grid.coords()[boundary])
    return u, arg, cfl


def howard_solve(grid: Grid, problem: ControlProblem, t_n: float, dt: float, theta: float,
                 u_prev, linear_solver: Optional[LinearSolver] = None, tol: float = 1e-8,
                 max_iters: int = 50, scheme=SchemeId.SCHEME2, mode=BoundaryMode.TRUNCATE,
                 use_exact_boundary: bool = True, cache: Optional[RowCache] = None,
                 initial_policy=None, system_callback: Optional[Callable] = None,
                 context: Optional[ThetaContext] = None) -> PolicyIterationState:
    """Policy iteration for one theta step.

    Starts from control index 0 everywhere (or ``initial_policy``) with
    ``u_prev`` as the initial guess for the first solve. Stops when the policy
    no longer changes or the nonlinear residual drops below
    ``tol * (1 + |F|_inf)``. Exceeding ``max_iters`` returns the best iterate
    with ``converged=False``. ``system_callback(system, x, report)`` sees every
    policy-evaluation system.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    ctx = context or ThetaContext.create(grid, problem, t_n, dt, theta, u_prev, scheme, mode,
                                         use_exact_boundary, cache=cache)
    if ctx.theta == 0.0:
        u, policy, cfl = _explicit_step(ctx)
        _, res = improve_policy(ctx, u, policy)
        r = float(np.max(np.abs(res))) if res.size else 0.0
        return PolicyIterationState(u, policy, r, 1, [r], [], True,
                                    ctx.dt / cfl if ctx.dt > cfl else None)
    solver = linear_solver or make_solver("agmg")
    base_tol = solver.tol
    n_int = ctx.interior.size
    policy = np.zeros(n_int, dtype=np.int64)
    if initial_policy is not None:
        init = np.asarray(initial_policy, dtype=np.int64).reshape(-1)
        policy = init[ctx.interior].copy() if init.size == grid.n_nodes else init.copy()
        if policy.size != n_int:
            raise ValueError("initial_policy needs one entry per node or per interior node")
    u = ctx.u_prev.copy()
    history: list[float] = []
    reports: list[SolveReport] = []
    best_state = None
    lin_tol = base_tol
    cfl_violation = None
    for it in range(1, max_iters + 1):
        full_policy = np.zeros(grid.n_nodes, dtype=np.int64)
        full_policy[ctx.interior] = policy
        sys_ = assemble_theta_system(grid, problem, full_policy, ctx.t_n, ctx.dt, ctx.theta,
                                     ctx.u_prev, context=ctx)
        cfl_violation = sys_.cfl_violation
        u, rep = solver.solve(sys_.matrix, sys_.rhs, x0=u, tol=lin_tol)
        reports.append(rep)
        if system_callback is not None:
            system_callback(sys_, u, rep)
        new_policy, res = improve_policy(ctx, u, policy)
        r = float(np.max(np.abs(res))) if res.size else 0.0
        history.append(r)
        scale = 1.0 + float(np.max(np.abs(sys_.rhs)))
        if best_state is None or r < best_state[2]:
            best_state = (u.copy(), policy.copy(), r)
        if np.array_equal(new_policy, policy) or r <= tol * scale:
            return PolicyIterationState(u, policy, r, it, history, reports, True, cfl_violation)
        policy = new_policy
        if solver.iterative:
            lin_tol = min(base_tol, max(0.1 * r / scale, 1e-14))
    log.warning("policy iteration did not converge in %d iterations (residual %.3e)",
                max_iters, best_state[2])
    u, policy, r = best_state
    return PolicyIterationState(u, policy, r, max_iters, history, reports, False, cfl_violation)


# ---------------------------------------------------------------------------
# time marching


@dataclass
class StepStats:
    step: int
    t: float
    policy_iterations: int
    linear_iterations: int
    nonlinear_residual: float
    max_abs_u: float
    cfl_violation: Optional[float] = None

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("step", "t", "policy_iterations", "linear_iterations",
                                               "nonlinear_residual", "max_abs_u", "cfl_violation")}


@dataclass
class MarchResult:
    grid: Grid
    problem: ControlProblem
    time_grid: TimeGrid
    u: np.ndarray
    t: float
    stats: list[StepStats]
    diverged: bool = False
    diverged_step: Optional[int] = None
    trajectory: Optional[list[np.ndarray]] = None

    def errors(self) -> tuple[float, float]:
        """L-inf errors over all nodes and over the problem's interior box (``inf`` if diverged)."""
        return solution_errors(self.grid, self.problem, self.u, self.t, self.diverged)


def solution_errors(grid: Grid, problem: ControlProblem, u: np.ndarray, t: float,
                    diverged: bool = False) -> tuple[float, float]:
    if problem.exact is None:
        raise ValueError("problem has no exact solution")
    X = grid.coords()
    with np.errstate(invalid="ignore", over="ignore"):
        err = np.abs(u - problem.exact(t, X))
    if not np.all(np.isfinite(err)):
        return np.inf, np.inf
    box = problem.in_interior_box(X)
    return float(err.max()), float(err[box].max())


def march(grid: Grid, problem: ControlProblem, time_grid: TimeGrid, theta: float,
          scheme=SchemeId.SCHEME2, boundary_mode=BoundaryMode.TRUNCATE,
          linear_solver: Optional[LinearSolver] = None, use_exact_boundary: bool = True,
          tol: float = 1e-8, max_policy_iters: int = 50, keep_trajectory: bool = False,
          divergence_threshold: float = DIVERGENCE_THRESHOLD,
          progress: Optional[Callable[[StepStats], None]] = None,
          system_callback: Optional[Callable] = None,
          cache: Optional[RowCache] = None) -> MarchResult:
    """March from ``u(0) = g`` to ``T`` with the theta scheme.

    A non-finite value or ``max |u| > divergence_threshold`` stops the run
    and marks it diverged with the offending step index.
    """
    scheme = SchemeId.parse(scheme)
    mode = BoundaryMode.parse(boundary_mode)
    if not 0.0 <= theta <= 1.0:
        raise ValueError("theta must lie in [0, 1]")
    X = grid.coords()
    u = np.asarray(problem.g(X), dtype=float).copy()
    boundary = grid.boundary_indices()
    u[boundary] = problem.psi(0.0, X[boundary])
    cache = RowCache() if cache is None else cache
    solver = linear_solver if linear_solver is not None or theta == 0 else make_solver("agmg")
    stats: list[StepStats] = []
    traj = [u.copy()] if keep_trajectory else None
    t_pts = time_grid.t_points
    for n in range(1, t_pts.size):
        dt = float(t_pts[n] - t_pts[n - 1])
        ctx = ThetaContext.create(grid, problem, float(t_pts[n]), dt, theta, u, scheme, mode,
                                  use_exact_boundary, X_all=X, cache=cache)
        state = howard_solve(grid, problem, ctx.t_n, dt, theta, u, solver, tol, max_policy_iters,
                             system_callback=system_callback, context=ctx)
        u = state.u
        finite = bool(np.all(np.isfinite(u)))
        max_u = float(np.max(np.abs(u))) if finite else np.inf
        st = StepStats(n, float(t_pts[n]), state.iterations, state.linear_iterations,
                       state.nonlinear_residual, max_u, state.cfl_violation)
        stats.append(st)
        if progress is not None:
            progress(st)
        if keep_trajectory:
            traj.append(u.copy())
        if not finite or max_u > divergence_threshold:
            log.info("run diverged at step %d (t = %.4g)", n, t_pts[n])
            return MarchResult(grid, problem, time_grid, u, float(t_pts[n]), stats, True, n, traj)
    return MarchResult(grid, problem, time_grid, u, time_grid.T, stats, False, None, traj)
