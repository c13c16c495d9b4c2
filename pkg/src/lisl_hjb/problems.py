"""HJB problem definitions.

A :class:`ControlProblem` describes

    u_t - inf_alpha { 1/2 tr(sigma sigma^T D^2 u) + b . Du + c u + f } = 0

on a rectangle with initial data ``g`` and Dirichlet data ``psi``. All
coefficient callbacks are vectorised over points: they receive ``t``, an
``(n, d)`` array of points and one control value, and return arrays with a
leading axis of length ``n`` (``sigma``: ``(n, d, P)``, ``b``: ``(n, d)``,
``c`` and ``f``: ``(n,)``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

Coefficient = Callable[[float, np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class DiscreteControls:
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.shape[0] < 1:
            raise ValueError("need at least one control")
        if len(np.unique(np.round(pts, 14), axis=0)) != pts.shape[0]:
            raise ValueError("control points must be distinct")
        object.__setattr__(self, "points", pts)

    @property
    def count(self) -> int:
        return self.points.shape[0]

    def __len__(self) -> int:
        return self.count

    def __getitem__(self, i) -> np.ndarray:
        return self.points[i]


def circle_controls(n_alpha: int) -> DiscreteControls:
    """``n_alpha`` equispaced unit vectors ``(cos th_i, sin th_i)``, ``th_i = 2 pi i / n_alpha``."""
    if n_alpha < 1:
        raise ValueError("n_alpha must be >= 1")
    th = 2 * np.pi * np.arange(n_alpha) / n_alpha
    return DiscreteControls(np.stack([np.cos(th), np.sin(th)], axis=1))


def _zeros(t, x, a):
    return np.zeros(x.shape[0])


@dataclass(frozen=True, eq=False)
class ControlProblem:
    name: str
    lo: np.ndarray
    hi: np.ndarray
    T: float
    P: int
    sigma: Coefficient
    b: Coefficient
    f: Coefficient
    g: Callable[[np.ndarray], np.ndarray]
    psi: Callable[[float, np.ndarray], np.ndarray]
    controls: DiscreteControls
    c: Coefficient = _zeros
    exact: Optional[Callable[[float, np.ndarray], np.ndarray]] = None
    interior_box: Optional[tuple[np.ndarray, np.ndarray]] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "lo", np.atleast_1d(np.asarray(self.lo, dtype=float)))
        object.__setattr__(self, "hi", np.atleast_1d(np.asarray(self.hi, dtype=float)))

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def n_alpha(self) -> int:
        return self.controls.count

    def in_interior_box(self, x: np.ndarray) -> np.ndarray:
        if self.interior_box is None:
            return np.ones(x.shape[0], dtype=bool)
        blo, bhi = (np.asarray(v, dtype=float) for v in self.interior_box)
        eps = 1e-12 * np.max(np.abs(bhi - blo))
        return np.all((x >= blo - eps) & (x <= bhi + eps), axis=1)


def eval_coefficients(problem: ControlProblem, t: float, x, alpha_index: int):
    """Pointwise coefficients ``(sigma (d, P), b (d,), c, f)`` at one point."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    a = problem.controls[alpha_index]
    sigma = np.asarray(problem.sigma(t, x, a)).reshape(1, problem.dim, problem.P)[0]
    b = np.asarray(problem.b(t, x, a)).reshape(1, problem.dim)[0]
    c = float(np.asarray(problem.c(t, x, a)).reshape(-1)[0])
    f = float(np.asarray(problem.f(t, x, a)).reshape(-1)[0])
    return sigma, b, c, f


# ---------------------------------------------------------------------------
# built-in benchmark problems

def _problem_a_sigma(t, x, a):
    s = x[:, 0] + x[:, 1]
    return np.sqrt(2.0) * np.stack([np.sin(s), np.cos(s)], axis=1)[:, :, None]


def _problem_a_b(t, x, a):
    return np.broadcast_to(np.asarray(a, dtype=float), (x.shape[0], 2)).copy()


def _problem_a_f(t, x, a):
    s1, s2 = np.sin(x[:, 0]), np.sin(x[:, 1])
    c1, c2 = np.cos(x[:, 0]), np.cos(x[:, 1])
    s = x[:, 0] + x[:, 1]
    grad = np.sqrt(c1**2 * s2**2 + s1**2 * c2**2)
    return (0.5 - t) * s1 * s2 + (1.5 - t) * (grad - 2 * np.sin(s) * np.cos(s) * c1 * c2)


def _problem_a_exact(t, x):
    return (1.5 - t) * np.sin(x[:, 0]) * np.sin(x[:, 1])


def _problem_b_sigma(t, x, a):
    col = np.sqrt(2.0) * np.asarray(a, dtype=float)
    return np.broadcast_to(col[None, :, None], (x.shape[0], 2, 1)).copy()


def _problem_b_b(t, x, a):
    return np.zeros((x.shape[0], 2))


def _problem_b_f(t, x, a):
    s1, s2 = np.sin(x[:, 0]), np.sin(x[:, 1])
    c1, c2 = np.cos(x[:, 0]), np.cos(x[:, 1])
    return (1 - t) * s1 * s2 - 2 * a[0] * a[1] * (2 - t) * c1 * c2


def _problem_b_exact(t, x):
    return (2 - t) * np.sin(x[:, 0]) * np.sin(x[:, 1])


BUILTIN_PROBLEMS = ("ProblemA", "ProblemB", "ProblemA_shifted")


def builtin_problem(name: str, n_alpha: int = 40) -> ControlProblem:
    """One of the benchmark problems ``ProblemA``, ``ProblemB``, ``ProblemA_shifted``."""
    controls = circle_controls(n_alpha)
    pi = np.pi
    key = name.replace("-", "_").lower()
    if key in ("problema", "a"):
        return ControlProblem(
            name="ProblemA", lo=[-pi, -pi], hi=[pi, pi], T=0.5, P=1,
            sigma=_problem_a_sigma, b=_problem_a_b, f=_problem_a_f,
            g=lambda x: _problem_a_exact(0.0, x), psi=_problem_a_exact,
            controls=controls, exact=_problem_a_exact,
            interior_box=(np.array([-pi / 2, -pi / 2]), np.array([pi / 2, pi / 2])))
    if key in ("problemb", "b"):
        return ControlProblem(
            name="ProblemB", lo=[-pi, -pi], hi=[pi, pi], T=0.5, P=1,
            sigma=_problem_b_sigma, b=_problem_b_b, f=_problem_b_f,
            g=lambda x: _problem_b_exact(0.0, x), psi=_problem_b_exact,
            controls=controls, exact=_problem_b_exact,
            interior_box=(np.array([-pi / 2, -pi / 2]), np.array([pi / 2, pi / 2])))
    if key in ("problema_shifted", "a_shifted", "shifted"):
        return ControlProblem(
            name="ProblemA_shifted", lo=[-pi / 8, -pi / 8], hi=[15 * pi / 8, 15 * pi / 8],
            T=0.5, P=1,
            sigma=_problem_a_sigma, b=_problem_a_b, f=_problem_a_f,
            g=lambda x: _problem_a_exact(0.0, x), psi=_problem_a_exact,
            controls=controls, exact=_problem_a_exact,
            interior_box=(np.array([3 * pi / 8, 3 * pi / 8]), np.array([11 * pi / 8, 11 * pi / 8])))
    raise ValueError(f"unknown problem {name!r}; choose from {BUILTIN_PROBLEMS}")


def pde_residual(problem: ControlProblem, t: float, x: np.ndarray, h: float = 1e-4) -> np.ndarray:
    """Residual of the exact solution in the HJB equation with the discrete control set.

    Derivatives of ``exact`` are taken by central differences with step ``h``.
    """
    if problem.exact is None:
        raise ValueError("problem has no exact solution")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    d = problem.dim
    u = problem.exact(t, x)
    u_t = (problem.exact(t + h, x) - problem.exact(t - h, x)) / (2 * h)
    eye = np.eye(d) * h
    grad = np.stack([(problem.exact(t, x + eye[i]) - problem.exact(t, x - eye[i])) / (2 * h)
                     for i in range(d)], axis=1)
    hess = np.empty((x.shape[0], d, d))
    for i in range(d):
        for j in range(d):
            hess[:, i, j] = (problem.exact(t, x + eye[i] + eye[j]) - problem.exact(t, x + eye[i] - eye[j])
                             - problem.exact(t, x - eye[i] + eye[j])
                             + problem.exact(t, x - eye[i] - eye[j])) / (4 * h * h)
    best = np.full(x.shape[0], np.inf)
    for a in problem.controls.points:
        sig = problem.sigma(t, x, a)
        a_mat = 0.5 * np.einsum("nip,njp->nij", sig, sig)
        val = (np.einsum("nij,nij->n", a_mat, hess) + np.einsum("ni,ni->n", problem.b(t, x, a), grad)
               + problem.c(t, x, a) * u + problem.f(t, x, a))
        best = np.minimum(best, val)
    return u_t - best
