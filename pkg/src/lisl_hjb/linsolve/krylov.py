"""Right-preconditioned BiCGSTAB and flexible GCR."""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from .report import SolveReport, SolverError

Preconditioner = Optional[Callable[[np.ndarray], np.ndarray]]

#: relative size of a BiCGSTAB inner product treated as breakdown
BREAKDOWN_TOL = 1e-30


def _identity(r):
    return r.copy()


def _start(A, b, x0):
    b = np.asarray(b, dtype=float)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float, copy=True)
    r = b - A @ x if np.any(x) else b.copy()
    return b, x, r


def _finish(method, x, hist, converged, raise_on_fail, reason="", info=None):
    report = SolveReport(len(hist) - 1, hist, converged, method, info or {})
    if not converged and raise_on_fail:
        raise SolverError(f"{method}: {reason}", report, x)
    return x, report


def bicgstab(A, b, preconditioner: Preconditioner = None, tol: float = 1e-6,
             max_iters: int = 1000, x0=None, raise_on_fail: bool = False):
    """BiCGSTAB with right preconditioning.

    Stops when ``|b - A x|_2 <= tol |b|_2``. Returns ``(x, SolveReport)``;
    breakdown or an exhausted budget gives ``converged=False`` (or raises
    :class:`SolverError` when ``raise_on_fail``).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    M = preconditioner or _identity
    b, x, r = _start(A, b, x0)
    bnorm = np.linalg.norm(b)
    hist = [float(np.linalg.norm(r))]
    if bnorm == 0.0:
        return _finish("bicgstab", np.zeros_like(b), [0.0], True, raise_on_fail)
    target = tol * bnorm
    if hist[0] <= target:
        return _finish("bicgstab", x, hist, True, raise_on_fail)
    r_hat = r.copy()
    rho = alpha = omega = 1.0
    v = np.zeros_like(b)
    p = np.zeros_like(b)
    for _ in range(max_iters):
        rho_new = float(r_hat @ r)
        if abs(rho_new) <= BREAKDOWN_TOL * bnorm * bnorm:
            return _finish("bicgstab", x, hist, False, raise_on_fail, "breakdown (rho ~ 0)")
        beta = (rho_new / rho) * (alpha / omega)
        p = r + beta * (p - omega * v)
        p_hat = M(p)
        v = A @ p_hat
        denom = float(r_hat @ v)
        if abs(denom) <= BREAKDOWN_TOL * bnorm * bnorm:
            return _finish("bicgstab", x, hist, False, raise_on_fail, "breakdown (r_hat . v ~ 0)")
        alpha = rho_new / denom
        s = r - alpha * v
        snorm = float(np.linalg.norm(s))
        if snorm <= target:
            x += alpha * p_hat
            hist.append(snorm)
            return _finish("bicgstab", x, hist, True, raise_on_fail)
        s_hat = M(s)
        t = A @ s_hat
        tt = float(t @ t)
        if tt == 0.0:
            return _finish("bicgstab", x, hist, False, raise_on_fail, "breakdown (t = 0)")
        omega = float(t @ s) / tt
        x += alpha * p_hat + omega * s_hat
        r = s - omega * t
        rho = rho_new
        hist.append(float(np.linalg.norm(r)))
        if hist[-1] <= target:
            return _finish("bicgstab", x, hist, True, raise_on_fail)
        if omega == 0.0:
            return _finish("bicgstab", x, hist, False, raise_on_fail, "breakdown (omega = 0)")
    return _finish("bicgstab", x, hist, False, raise_on_fail, f"no convergence in {max_iters} iterations")


def gcr(A, b, preconditioner: Preconditioner = None, tol: float = 1e-6, max_iters: int = 1000,
        restart: int = 30, x0=None, raise_on_fail: bool = False):
    """Flexible GCR with right preconditioning and restarts.

    The preconditioner may change between iterations (it is applied once per
    iteration and the preconditioned direction is stored), which is what a
    K-cycle needs.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    M = preconditioner or _identity
    b, x, r = _start(A, b, x0)
    bnorm = np.linalg.norm(b)
    hist = [float(np.linalg.norm(r))]
    if bnorm == 0.0:
        return _finish("gcr", np.zeros_like(b), [0.0], True, raise_on_fail)
    target = tol * bnorm
    if hist[0] <= target:
        return _finish("gcr", x, hist, True, raise_on_fail)
    Z: list[np.ndarray] = []
    W: list[np.ndarray] = []
    for _ in range(max_iters):
        z = M(r)
        w = A @ z
        for zi, wi in zip(Z, W):
            beta = float(w @ wi)
            w -= beta * wi
            z -= beta * zi
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return _finish("gcr", x, hist, False, raise_on_fail, "stagnation (zero search direction)")
        w /= nw
        z /= nw
        a = float(r @ w)
        x += a * z
        r -= a * w
        hist.append(float(np.linalg.norm(r)))
        if hist[-1] <= target:
            return _finish("gcr", x, hist, True, raise_on_fail)
        Z.append(z)
        W.append(w)
        if len(Z) >= restart:
            Z.clear()
            W.clear()
    return _finish("gcr", x, hist, False, raise_on_fail, f"no convergence in {max_iters} iterations")
