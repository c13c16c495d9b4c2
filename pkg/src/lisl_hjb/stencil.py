"""LISL step vectors and their truncation at the boundary of a rectangle.

A node stencil is the list of step pairs ``(y+, y-)`` of one of the three
LISL variants. Near the boundary a step is shortened to the point where the
ray leaves the domain and the finite-difference weights ``A``, ``B`` are
re-derived so that the scheme stays consistent:

* diffusion pair: ``A = 2 / (mu+^2 + mu+ mu-)``, ``B = 2 / (mu-^2 + mu- mu+)``
* drift pair:     ``A = B = 1 / mu``

Only the drift/diffusion split of Scheme 2 admits such weights; truncating a
Scheme 1 or Scheme 3 stencil is rejected.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .grid import BOUNDARY_TOL, Grid

#: a step is considered to overstep when its exit parameter is below 1 - OVERSTEP_TOL
OVERSTEP_TOL = 1e-12


class SchemeId(enum.IntEnum):
    SCHEME1 = 1
    SCHEME2 = 2
    SCHEME3 = 3

    @classmethod
    def parse(cls, value) -> "SchemeId":
        if isinstance(value, SchemeId):
            return value
        if isinstance(value, str):
            key = value.strip().lower().replace("_", "").replace(" ", "")
            table = {"scheme1": cls.SCHEME1, "scheme2": cls.SCHEME2, "scheme3": cls.SCHEME3,
                     "1": cls.SCHEME1, "2": cls.SCHEME2, "3": cls.SCHEME3}
            if key in table:
                return table[key]
        return cls(int(value))


class BoundaryMode(enum.IntEnum):
    """How stencil endpoints outside the domain are treated."""

    TRUNCATE = 0
    CONST_EXTRAP = 1
    LIN_EXTRAP = 2

    @classmethod
    def parse(cls, value) -> "BoundaryMode":
        if isinstance(value, BoundaryMode):
            return value
        table = {"truncate": cls.TRUNCATE, "const_extrap": cls.CONST_EXTRAP,
                 "lin_extrap": cls.LIN_EXTRAP, "constant": cls.CONST_EXTRAP,
                 "linear": cls.LIN_EXTRAP}
        if isinstance(value, str) and value.lower() in table:
            return table[value.lower()]
        return cls(int(value))


class Overstep(enum.IntEnum):
    NONE = 0
    ONE_SIDED_PLUS = 1
    ONE_SIDED_MINUS = 2
    TWO_SIDED = 3


class StencilError(ValueError):
    """Raised for stencils the selected scheme cannot treat consistently."""


@dataclass(frozen=True)
class StepPair:
    y_plus: np.ndarray
    y_minus: np.ndarray
    kind: str  # "diffusion" or "drift"
    index: int = 0


@dataclass(frozen=True)
class TruncatedStep:
    """A step pair after boundary treatment.

    ``plus_treatment`` / ``minus_treatment`` say how the value at the endpoint
    is obtained: ``"interp"`` (multilinear interpolation of nodal values),
    ``"exact"`` (Dirichlet datum at the endpoint), ``"const"`` (boundary datum
    at the exit point, step kept at full length) or ``"linear"`` (value
    extrapolated along the ray from the exit point and the node itself).
    """

    kind: str
    y_plus: np.ndarray
    y_minus: np.ndarray
    y_hat_plus: np.ndarray
    y_hat_minus: np.ndarray
    mu_plus: float
    mu_minus: float
    A: float
    B: float
    overstep: Overstep
    plus_treatment: str = "interp"
    minus_treatment: str = "interp"


def lisl_steps(scheme, sigma, b, dx_scalar: float) -> list[StepPair]:
    """Step pairs of a LISL scheme at one point.

    Parameters
    ----------
    scheme : SchemeId
    sigma : array_like, shape (d, P)
        Diffusion matrix, one column per direction.
    b : array_like, shape (d,)
        Drift.
    dx_scalar : float
        Mesh parameter; diffusion steps have length ``sqrt(dx) |sigma_p|``.
    """
    scheme = SchemeId.parse(scheme)
    if dx_scalar <= 0:
        raise ValueError("dx_scalar must be positive")
    sigma = np.asarray(sigma, dtype=float)
    b = np.asarray(b, dtype=float).reshape(-1)
    if sigma.ndim == 1:
        sigma = sigma[:, None]
    d, P = sigma.shape
    if b.shape != (d,):
        raise ValueError("drift and diffusion dimensions disagree")
    if P == 0 and not np.any(b):
        raise ValueError("empty operator: no diffusion columns and zero drift")
    k = np.sqrt(dx_scalar)
    if P == 0:
        # pure transport: every variant reduces to the one-sided drift difference
        drift = dx_scalar * b
        return [StepPair(drift, drift.copy(), "drift", 0)]
    pairs = []
    if scheme is SchemeId.SCHEME1:
        shift = dx_scalar / P * b
        for p in range(P):
            pairs.append(StepPair(k * sigma[:, p] + shift, -k * sigma[:, p] + shift, "diffusion", p))
    elif scheme is SchemeId.SCHEME2:
        for p in range(P):
            pairs.append(StepPair(k * sigma[:, p], -k * sigma[:, p], "diffusion", p))
        drift = dx_scalar * b
        pairs.append(StepPair(drift, drift.copy(), "drift", P))
    else:
        for p in range(P - 1):
            pairs.append(StepPair(k * sigma[:, p], -k * sigma[:, p], "diffusion", p))
        shift = dx_scalar * b
        pairs.append(StepPair(k * sigma[:, P - 1] + shift, -k * sigma[:, P - 1] + shift,
                              "diffusion", P - 1))
    return pairs


def exit_parameter(grid: Grid, x, y) -> tuple[float, int]:
    """Ray-box intersection: smallest ``t > 0`` with ``x + t y`` on a face.

    Returns ``(t, axis)``; ``t = inf`` if the ray never leaves the box. Ties
    between faces go to the lowest axis.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    best, axis = np.inf, -1
    for i in range(grid.dim):
        if y[i] > 0:
            t = (grid.hi[i] - x[i]) / y[i]
        elif y[i] < 0:
            t = (grid.lo[i] - x[i]) / y[i]
        else:
            continue
        if t < best:
            best, axis = t, i
    return best, axis


def truncate_step(grid: Grid, x, y) -> tuple[float, np.ndarray]:
    """Shorten ``y`` so that ``x + mu y`` stays in the closed domain.

    Returns ``(mu, y_hat)`` with ``mu = 1`` if the full step already lands in
    the domain, and otherwise ``x + y_hat`` placed exactly on the exit face.
    """
    y = np.asarray(y, dtype=float)
    if not np.any(y):
        raise ValueError("zero step has no exit point; skip it")
    x = np.asarray(x, dtype=float)
    t, axis = exit_parameter(grid, x, y)
    if t >= 1.0 - OVERSTEP_TOL:
        return 1.0, y.copy()
    mu = max(t, 0.0)
    y_hat = mu * y
    face = grid.hi[axis] if y[axis] > 0 else grid.lo[axis]
    y_hat[axis] = face - x[axis]
    return mu, y_hat


def truncation_weights(kind: str, mu_plus: float, mu_minus: float) -> tuple[float, float]:
    if mu_plus <= 0 or mu_minus <= 0:
        raise ValueError("truncation fractions must be positive")
    if kind == "drift":
        return 1.0 / mu_plus, 1.0 / mu_minus
    a = 2.0 / (mu_plus * mu_plus + mu_plus * mu_minus)
    b = 2.0 / (mu_minus * mu_minus + mu_minus * mu_plus)
    return a, b


def _classify(mu_plus: float, mu_minus: float) -> Overstep:
    plus, minus = mu_plus < 1.0, mu_minus < 1.0
    if plus and minus:
        return Overstep.TWO_SIDED
    if plus:
        return Overstep.ONE_SIDED_PLUS
    if minus:
        return Overstep.ONE_SIDED_MINUS
    return Overstep.NONE


def build_node_stencil(grid: Grid, x, scheme, sigma, b, use_exact_boundary: bool = True,
                       mode=BoundaryMode.TRUNCATE) -> list[TruncatedStep]:
    """Boundary-treated stencil of the interior node ``x``.

    Zero steps (e.g. the drift pair when ``b = 0``) are omitted.
    """
    scheme = SchemeId.parse(scheme)
    mode = BoundaryMode.parse(mode)
    x = np.asarray(x, dtype=float)
    out = []
    for pair in lisl_steps(scheme, sigma, b, grid.h):
        plus_zero, minus_zero = not np.any(pair.y_plus), not np.any(pair.y_minus)
        if plus_zero and minus_zero:
            continue
        mu_p, yh_p = (1.0, pair.y_plus.copy()) if plus_zero else truncate_step(grid, x, pair.y_plus)
        mu_m, yh_m = (1.0, pair.y_minus.copy()) if minus_zero else truncate_step(grid, x, pair.y_minus)
        overstep = _classify(mu_p, mu_m)
        if pair.kind == "drift" and overstep is not Overstep.NONE:
            # both endpoints coincide; count the exit once
            overstep = Overstep.ONE_SIDED_PLUS
        if overstep is Overstep.NONE:
            out.append(TruncatedStep(pair.kind, pair.y_plus, pair.y_minus, pair.y_plus,
                                     pair.y_minus, 1.0, 1.0, 1.0, 1.0, overstep))
            continue
        if mode is BoundaryMode.TRUNCATE:
            if scheme is not SchemeId.SCHEME2:
                raise StencilError(
                    f"{scheme.name} stencil oversteps at x={x.tolist()}; "
                    "only Scheme 2 has consistent truncation weights")
            if overstep is Overstep.TWO_SIDED and pair.kind == "diffusion" and not use_exact_boundary:
                raise StencilError(
                    f"two-sided overstep at x={x.tolist()} requires exact boundary values")
            A, B = truncation_weights(pair.kind, mu_p, mu_m)
            cut = "exact" if use_exact_boundary else "interp"
            out.append(TruncatedStep(pair.kind, pair.y_plus, pair.y_minus, yh_p, yh_m, mu_p, mu_m,
                                     A, B, overstep,
                                     cut if mu_p < 1.0 else "interp",
                                     cut if mu_m < 1.0 else "interp"))
        else:
            tag = "const" if mode is BoundaryMode.CONST_EXTRAP else "linear"
            out.append(TruncatedStep(pair.kind, pair.y_plus, pair.y_minus, yh_p, yh_m, mu_p, mu_m,
                                     1.0, 1.0, overstep,
                                     tag if mu_p < 1.0 else "interp",
                                     tag if mu_m < 1.0 else "interp"))
    return out


def consistency_residuals(step: TruncatedStep, sigma_p, dx_scalar: float) -> tuple[float, float]:
    """Residuals of the first- and second-moment consistency conditions.

    For a diffusion pair returns ``max_i |A yh+_i + B yh-_i|`` and
    ``max_{i1,i2} |A yh+_i1 yh+_i2 + B yh-_i1 yh-_i2 - 2 dx s_i1 s_i2|``; for a
    drift pair the first entry is ``max_i |(A + B) yh_i - 2 dx b_i|`` with
    ``sigma_p`` standing for ``b``, and the second entry is 0.
    """
    s = np.asarray(sigma_p, dtype=float)
    yp, ym = step.y_hat_plus, step.y_hat_minus
    if step.kind == "drift":
        return float(np.max(np.abs((step.A + step.B) * yp - 2 * dx_scalar * s))), 0.0
    first = np.max(np.abs(step.A * yp + step.B * ym))
    second = np.max(np.abs(step.A * np.outer(yp, yp) + step.B * np.outer(ym, ym)
                           - 2 * dx_scalar * np.outer(s, s)))
    return float(first), float(second)


__all__ = [
    "BOUNDARY_TOL", "BoundaryMode", "Overstep", "SchemeId", "StencilError", "StepPair",
    "TruncatedStep", "build_node_stencil", "consistency_residuals", "exit_parameter",
    "lisl_steps", "truncate_step", "truncation_weights",
]
