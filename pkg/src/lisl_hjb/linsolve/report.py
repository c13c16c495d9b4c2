"""Solver reports and errors shared by the iterative methods."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class SolverError(RuntimeError):
    """Breakdown, stagnation or an exhausted iteration budget."""

    def __init__(self, message: str, report: "SolveReport | None" = None, x=None):
        super().__init__(message)
        self.report = report
        self.x = x


@dataclass
class SolveReport:
    """Convergence record of one solve.

    ``residual_history[k]`` is the Euclidean norm of the residual after ``k``
    iterations, so it always holds at least the initial residual.
    """

    iterations: int
    residual_history: list[float]
    converged: bool
    method: str = ""
    info: dict = field(default_factory=dict)

    @property
    def rho(self) -> float:
        """Mean reduction factor ``(r_k / r_0)^(1/k)``; 0 when no iteration was needed."""
        k = self.iterations
        r0, rk = self.residual_history[0], self.residual_history[-1]
        if k == 0 or r0 == 0.0:
            return 0.0
        return float((rk / r0) ** (1.0 / k))

    @property
    def relative_residual(self) -> float:
        r0 = self.residual_history[0]
        return 0.0 if r0 == 0.0 else float(self.residual_history[-1] / r0)

    def to_dict(self) -> dict:
        return {"method": self.method, "iterations": self.iterations, "rho": self.rho,
                "converged": self.converged, "final_relative_residual": self.relative_residual}


def residual_norm(A, x, b) -> float:
    return float(np.linalg.norm(b - A @ x))
