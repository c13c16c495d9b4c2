"""Wide-stencil semi-Lagrangian solvers for Hamilton-Jacobi-Bellman equations.

The package is split into the mesh and interpolation layer (:mod:`grid`,
:mod:`interp`), the LISL stencil with boundary truncation (:mod:`stencil`),
problem definitions (:mod:`problems`), theta-scheme assembly and policy
iteration (:mod:`assembly`, :mod:`hjb_solver`), the linear solver stack
(:mod:`linsolve`), Fourier and spectral analysis (:mod:`analysis`) and the
experiment harness (:mod:`harness`).
"""

from .grid import Grid, build_grid, locate
from .interp import interp_weights, interpolate
from .problems import ControlProblem, DiscreteControls, builtin_problem, circle_controls
from .stencil import BoundaryMode, SchemeId, StencilError, build_node_stencil, lisl_steps

__version__ = "0.1.0"

__all__ = [
    "BoundaryMode", "ControlProblem", "DiscreteControls", "Grid", "SchemeId", "StencilError",
    "build_grid", "build_node_stencil", "builtin_problem", "circle_controls", "interp_weights",
    "interpolate", "lisl_steps", "locate",
]
