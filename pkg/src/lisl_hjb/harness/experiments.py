"""Experiment runners behind the CLI."""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass
from typing import Callable, Optional, TextIO

import numpy as np

from .. import analysis
from ..assembly import assemble_theta_system, export_matrix_market
from ..grid import build_grid
from ..hjb_solver import TimeGrid, march
from ..linsolve import SolverError, make_solver, read_matrix_market
from ..problems import builtin_problem
from .config import ExperimentConfig, resolve_dt
from .emit import BENCH_COLUMNS, CONVERGENCE_COLUMNS, Table


@dataclass
class ConvergenceRow:
    N_x: int
    error_full: float
    error_interior: float
    rate_full: float = math.nan
    rate_interior: float = math.nan
    diverged: bool = False


class ProgressStream:
    """JSON-lines progress records, one per event."""

    def __init__(self, stream: Optional[TextIO] = None):
        self.stream = stream

    def __call__(self, event: str, **payload) -> None:
        if self.stream is None:
            return
        rec = {"event": event}
        rec.update(payload)
        self.stream.write(json.dumps(rec, default=_jsonable) + "\n")
        self.stream.flush()


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return str(v)


def rates(errors: list[float], diverged: list[bool]) -> list[float]:
    """``log2(e_prev / e)`` per row; NaN for the first row and around diverged rows."""
    out = [math.nan]
    for k in range(1, len(errors)):
        if diverged[k] or diverged[k - 1] or not (errors[k] > 0 and errors[k - 1] > 0):
            out.append(math.nan)
        elif not (math.isfinite(errors[k]) and math.isfinite(errors[k - 1])):
            out.append(math.nan)
        else:
            out.append(math.log2(errors[k - 1] / errors[k]))
    return out


def _solver(cfg: ExperimentConfig):
    s = cfg.solver
    return make_solver(s.name, tol=s.tol, max_iters=s.max_iters, **s.params)


def run_convergence(cfg: ExperimentConfig, progress: Optional[ProgressStream] = None,
                    system_callback: Optional[Callable] = None) -> list[ConvergenceRow]:
    problem = builtin_problem(cfg.problem, cfg.n_alpha)
    if problem.exact is None:
        raise ValueError("convergence studies need an exact solution")
    progress = progress or ProgressStream()
    rows: list[ConvergenceRow] = []
    for N in cfg.meshes:
        grid = build_grid(problem.lo, problem.hi, int(N))
        dt = resolve_dt(cfg.dt, grid.h, problem.T)
        progress("mesh_start", N_x=int(N), dt=dt)
        solver = _solver(cfg) if cfg.theta > 0 else None
        if solver is not None and solver.name in ("gmg", "gcr-gmg"):
            solver.params.setdefault("shape", grid.shape)

        def on_step(st, N=N):
            progress("step", N_x=int(N), **st.to_dict())

        res = march(grid, problem, TimeGrid.uniform(problem.T, dt), cfg.theta, cfg.scheme,
                    cfg.boundary_mode, solver, cfg.use_exact_boundary, cfg.policy_tol,
                    progress=on_step, system_callback=system_callback)
        e_full, e_int = res.errors()
        if res.diverged:
            e_full = float(np.max(np.abs(res.u))) if np.all(np.isfinite(res.u)) else math.inf
            e_int = e_full
        rows.append(ConvergenceRow(int(N), e_full, e_int, diverged=res.diverged))
        progress("mesh_done", N_x=int(N), error_full=e_full, error_interior=e_int,
                 diverged=res.diverged, diverged_step=res.diverged_step)
    full = rates([r.error_full for r in rows], [r.diverged for r in rows])
    inner = rates([r.error_interior for r in rows], [r.diverged for r in rows])
    for r, a, b in zip(rows, full, inner):
        r.rate_full, r.rate_interior = a, b
    return rows


def convergence_table(rows: list[ConvergenceRow], name: str = "convergence") -> Table:
    return Table(CONVERGENCE_COLUMNS, [asdict(r) for r in rows], name)


# ---------------------------------------------------------------------------
# solver benchmarks


def bench_matrix(cfg: ExperimentConfig, sigma: float, level: int):
    """``(matrix, grid shape or None)`` for one benchmark cell."""
    b = cfg.bench
    if b.model == "lisl2d":
        n = 2**level + 1
        return analysis.lisl_model_2d(level, sigma), (n, n)
    if b.model == "lisl1d":
        m, g = analysis.lisl_parameters(sigma, 2.0**-level)
        return analysis.build_lisl_matrix(2**level + 1, m, g), (2**level + 1,)
    if b.model == "laplace2d":
        n = 2**level + 1
        return analysis.laplacian_2d(n), (n, n)
    if b.model == "problem":
        problem = builtin_problem(cfg.problem, cfg.n_alpha)
        n = 2**level + 1
        grid = build_grid(problem.lo, problem.hi, n)
        u0 = problem.g(grid.coords())
        dt = resolve_dt(cfg.dt, grid.h, problem.T)
        sys_ = assemble_theta_system(grid, problem, 0, dt, dt, 1.0, u0, cfg.scheme,
                                     cfg.boundary_mode, cfg.use_exact_boundary)
        return sys_.matrix, grid.shape
    if b.model == "matrix_market":
        if not b.matrix_path:
            raise ValueError("matrix_market model needs bench.matrix_path")
        return read_matrix_market(b.matrix_path), None
    raise ValueError(f"unknown bench model {b.model!r}")


def run_solver_bench(cfg: ExperimentConfig, progress: Optional[ProgressStream] = None,
                     timings: bool = False) -> list[dict]:
    """One record per (solver, sigma, level): residual reduction, iterations, complexities.

    The right-hand side is a standard normal vector from ``cfg.seed``; the
    initial guess is zero. Breakdown is recorded in ``status``.
    """
    progress = progress or ProgressStream()
    b = cfg.bench
    records = []
    levels = b.levels if b.model != "matrix_market" else [0]
    sigmas = b.sigmas if b.model in ("lisl2d", "lisl1d") else [math.nan]
    for sigma in sigmas:
        for level in levels:
            A, shape = bench_matrix(cfg, sigma, level)
            rhs = np.random.default_rng(cfg.seed).standard_normal(A.shape[0])
            for name in b.solvers:
                params = dict(b.solver_params.get(name, {}))
                if shape is not None and name in ("gmg", "gcr-gmg"):
                    params.setdefault("shape", shape)
                rec = {"solver": name, "model": b.model, "sigma": float(sigma), "level": int(level),
                       "n": int(A.shape[0]), "iterations": None, "rho": math.nan,
                       "converged": False, "c_G": math.nan, "c_A": math.nan, "levels": None,
                       "status": "ok"}
                t0 = time.perf_counter()
                try:
                    solver = make_solver(name, tol=cfg.solver.tol, max_iters=cfg.solver.max_iters,
                                         **params)
                    _, rep = solver.solve(A, rhs)
                    rec.update(iterations=rep.iterations, rho=rep.rho, converged=rep.converged)
                    if "c_G" in rep.info:
                        rec.update(c_G=rep.info["c_G"], c_A=rep.info["c_A"], levels=rep.info["levels"])
                    if not rep.converged:
                        rec["status"] = "not converged"
                except (SolverError, ValueError, ZeroDivisionError, MemoryError) as exc:
                    rec["status"] = f"failed: {exc}"
                if timings:
                    rec["time"] = time.perf_counter() - t0
                records.append(rec)
                progress("bench", **rec)
    return records


def bench_table(records: list[dict], timings: bool = False) -> Table:
    cols = list(BENCH_COLUMNS) + (["time"] if timings else [])
    return Table(cols, records, "solver_bench")


# ---------------------------------------------------------------------------
# analysis


LFA_COLUMNS = ("m1", "m2", "gamma1", "gamma2", "mode", "resolution", "mu_loc", "theta1", "theta2")
SPECTRUM_COLUMNS = ("N", "m", "max_eigenvalue_error", "max_residual")


def run_lfa(cfg: ExperimentConfig) -> Table:
    res = int(cfg.lfa.get("resolution", 256))
    configs = cfg.lfa.get("configs") or [{"m1": 1, "m2": 1}, {"m1": 9, "m2": 3, "gamma1": 0.5}]
    rows = []
    for c in configs:
        sc = analysis.SmootherSymbolConfig(int(c["m1"]), int(c["m2"]), float(c.get("gamma1", 1.0)),
                                           float(c.get("gamma2", 1.0)), c.get("mode", "axis_aligned"))
        mu, (a, b) = analysis.smoothing_factor(sc, res, return_argmax=True)
        rows.append({"m1": sc.m1, "m2": sc.m2, "gamma1": sc.gamma1, "gamma2": sc.gamma2,
                     "mode": sc.mode.value, "resolution": res, "mu_loc": mu, "theta1": a, "theta2": b})
    return Table(LFA_COLUMNS, rows, "lfa")


def spectrum_check(N: int, m: int) -> dict:
    lam, V = analysis.kronecker_eigen(N, m)
    L = analysis.build_lisl_matrix(N, m, 1.0).toarray()
    dense = np.sort(np.linalg.eigvalsh(L))
    resid = np.max(np.abs(L @ V - V * lam)) if N else 0.0
    return {"N": N, "m": m, "max_eigenvalue_error": float(np.max(np.abs(dense - lam))),
            "max_residual": float(resid)}


def run_spectrum(cfg: ExperimentConfig) -> Table:
    cases = cfg.spectrum.get("cases") or [[N, m] for N in (12, 31, 64) for m in range(1, 7)]
    return Table(SPECTRUM_COLUMNS, [spectrum_check(int(N), int(m)) for N, m in cases], "spectrum")


def run_experiment(cfg: ExperimentConfig, progress: Optional[ProgressStream] = None,
                   timings: bool = False) -> Table:
    if cfg.kind in ("convergence", "stability"):
        return convergence_table(run_convergence(cfg, progress), cfg.output.name)
    if cfg.kind == "solver_bench":
        return bench_table(run_solver_bench(cfg, progress, timings), timings)
    if cfg.kind == "lfa":
        return run_lfa(cfg)
    if cfg.kind == "spectrum":
        return run_spectrum(cfg)
    raise ValueError(f"unknown experiment kind {cfg.kind!r}")


def export_problem_matrix(cfg: ExperimentConfig, N: int, path) -> None:
    """Matrix Market dump of the policy-0 evaluation matrix of ``cfg.problem`` at ``N`` nodes."""
    problem = builtin_problem(cfg.problem, cfg.n_alpha)
    grid = build_grid(problem.lo, problem.hi, N)
    dt = resolve_dt(cfg.dt, grid.h, problem.T)
    sys_ = assemble_theta_system(grid, problem, 0, dt, dt, max(cfg.theta, 1e-12),
                                 problem.g(grid.coords()), cfg.scheme, cfg.boundary_mode,
                                 cfg.use_exact_boundary)
    export_matrix_market(sys_, path)


__all__ = [
    "ConvergenceRow", "ProgressStream", "bench_matrix", "bench_table", "convergence_table",
    "export_problem_matrix", "rates", "run_convergence", "run_experiment", "run_lfa",
    "run_solver_bench", "run_spectrum", "spectrum_check",
]
