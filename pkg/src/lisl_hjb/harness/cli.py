"""Command line entry point ``lisl-hjb``.

Verbs: ``converge``, ``bench-solvers``, ``lfa``, ``spectrum`` and
``run <config.yaml>``. Output goes to stdout unless ``--output`` is given;
``--emit`` selects csv, json or markdown.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from .. import analysis
from ..linsolve import SOLVER_NAMES
from .config import (DEFAULT_SEED, DT_RULES, THREADS_ENV, BenchConfig, ExperimentConfig,
                     SolverConfig, load_config)
from .emit import SUFFIX, Table, emit
from .experiments import ProgressStream, export_problem_matrix, run_experiment


def _dt_arg(value: str):
    if value in DT_RULES:
        return value
    try:
        v = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"dt must be a number or one of {DT_RULES}") from None
    if v <= 0:
        raise argparse.ArgumentTypeError("dt must be positive")
    return v


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--emit", choices=("csv", "json", "markdown"), default="csv")
    p.add_argument("--output", type=Path, default=None, help="file to write (default: stdout)")
    p.add_argument("--progress", default=None,
                   help="write JSON-lines progress records to this file ('-' for stderr)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lisl-hjb", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("converge", help="convergence / stability table for a built-in problem")
    c.add_argument("--problem", default="ProblemA")
    c.add_argument("--scheme", default="2")
    c.add_argument("--theta", type=float, default=1.0)
    c.add_argument("--boundary-mode", default="truncate",
                   choices=("truncate", "const_extrap", "lin_extrap"))
    c.add_argument("--interpolated-boundary", action="store_true",
                   help="interpolate nodal values at truncated endpoints instead of using psi")
    c.add_argument("--meshes", type=int, nargs="+", default=[41, 81, 161])
    c.add_argument("--dt", type=_dt_arg, default="T")
    c.add_argument("--n-alpha", type=int, default=40)
    c.add_argument("--solver", default="agmg", choices=SOLVER_NAMES)
    c.add_argument("--tol", type=float, default=1e-6)
    c.add_argument("--policy-tol", type=float, default=1e-8)
    c.add_argument("--export-mtx", type=Path, default=None,
                   help="also dump the first mesh's policy-0 matrix in Matrix Market format")
    _common(c)

    b = sub.add_parser("bench-solvers", help="residual reduction and complexities of the solvers")
    b.add_argument("--model", default="lisl2d",
                   choices=("lisl2d", "lisl1d", "laplace2d", "problem", "matrix_market"))
    b.add_argument("--sigma", type=float, nargs="+", default=[2.0])
    b.add_argument("--levels", type=int, nargs="+", default=[6, 7, 8])
    b.add_argument("--solvers", nargs="+", default=["agmg", "gmg"], choices=SOLVER_NAMES)
    b.add_argument("--problem", default="ProblemA")
    b.add_argument("--matrix", default=None, help="Matrix Market file for --model matrix_market")
    b.add_argument("--tol", type=float, default=1e-6)
    b.add_argument("--max-iters", type=int, default=500)
    b.add_argument("--seed", type=int, default=DEFAULT_SEED)
    b.add_argument("--timings", action="store_true", help="include wall-clock times")
    _common(b)

    f = sub.add_parser("lfa", help="Gauss-Seidel smoothing factor of a LISL stencil")
    f.add_argument("--m1", type=int, default=1)
    f.add_argument("--m2", type=int, default=1)
    f.add_argument("--gamma1", type=float, default=1.0)
    f.add_argument("--gamma2", type=float, default=1.0)
    f.add_argument("--mode", default="axis_aligned", choices=[m.value for m in analysis.SymbolMode])
    f.add_argument("--resolution", type=int, default=256)
    f.add_argument("--field-csv", type=Path, default=None,
                   help="write the (theta1, theta2, |S|) field for heatmaps")
    _common(f)

    s = sub.add_parser("spectrum", help="check the block spectrum of L^m_N against a dense solver")
    s.add_argument("--N", type=int, nargs="+", default=[12, 31, 64])
    s.add_argument("--m", type=int, nargs="+", default=[1, 2, 3, 4, 5, 6])
    _common(s)

    r = sub.add_parser("run", help="run an experiment described by a YAML config")
    r.add_argument("config", type=Path)
    r.add_argument("--timings", action="store_true")
    _common(r)
    return ap


def _config_from_args(args) -> ExperimentConfig:
    if args.command == "converge":
        return ExperimentConfig(
            kind="convergence", problem=args.problem, scheme=args.scheme, theta=args.theta,
            boundary_mode=args.boundary_mode, use_exact_boundary=not args.interpolated_boundary,
            meshes=args.meshes, dt=args.dt, n_alpha=args.n_alpha, policy_tol=args.policy_tol,
            solver=SolverConfig(args.solver, args.tol)).validate()
    if args.command == "bench-solvers":
        return ExperimentConfig(
            kind="solver_bench", problem=args.problem, seed=args.seed,
            solver=SolverConfig("agmg", args.tol, args.max_iters),
            bench=BenchConfig(args.model, args.sigma, args.levels, args.solvers,
                              matrix_path=args.matrix)).validate()
    if args.command == "lfa":
        return ExperimentConfig(kind="lfa", lfa={
            "resolution": args.resolution,
            "configs": [{"m1": args.m1, "m2": args.m2, "gamma1": args.gamma1,
                         "gamma2": args.gamma2, "mode": args.mode}]}).validate()
    if args.command == "spectrum":
        return ExperimentConfig(kind="spectrum", spectrum={
            "cases": [[n, m] for n in args.N for m in args.m]}).validate()
    return load_config(args.config)


def _apply_thread_env() -> None:
    threads = os.environ.get(THREADS_ENV)
    if threads:
        import numba

        numba.set_num_threads(max(1, min(int(threads), numba.config.NUMBA_NUM_THREADS)))


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    _apply_thread_env()
    try:
        cfg = _config_from_args(args)
    except (ValueError, OSError) as exc:
        print(f"lisl-hjb: {exc}", file=sys.stderr)
        return 2
    stream = None
    if args.progress == "-":
        stream = sys.stderr
    elif args.progress:
        stream = open(args.progress, "w")
    try:
        table: Table = run_experiment(cfg, ProgressStream(stream), getattr(args, "timings", False))
        if args.command == "lfa" and args.field_csv is not None:
            sc = analysis.SmootherSymbolConfig(args.m1, args.m2, args.gamma1, args.gamma2, args.mode)
            analysis.write_field_csv(args.field_csv, sc, args.resolution)
        if args.command == "converge" and args.export_mtx is not None:
            export_problem_matrix(cfg, cfg.meshes[0], args.export_mtx)
    finally:
        if stream is not None and stream is not sys.stderr:
            stream.close()
    if args.command == "run" and args.output is None:
        out = cfg.output
        for fmt in out.formats:
            path = out.resolved_dir() / f"{out.name}{SUFFIX[fmt]}"
            emit(table, fmt, path)
            print(f"wrote {path}", file=sys.stderr)
        return 0
    text = emit(table, args.emit, args.output)
    if args.output is None:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
