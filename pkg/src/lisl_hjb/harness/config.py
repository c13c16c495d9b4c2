"""Experiment configuration (YAML).

A config file holds one experiment::

    kind: convergence            # convergence | stability | solver_bench | lfa | spectrum
    problem: ProblemA
    scheme: 2
    theta: 1.0
    boundary_mode: truncate      # truncate | const_extrap | lin_extrap
    use_exact_boundary: true
    meshes: [41, 81, 161]
    dt: T                        # T | dx | dx_over_4 | dx_1p5 | dx_sq | <number>
    n_alpha: 40
    policy_tol: 1.0e-8
    solver: {name: agmg, tol: 1.0e-6, max_iters: 500}
    seed: 42
    output: {dir: results, name: table4a, formats: [csv]}

``solver_bench`` adds a ``bench`` section::

    bench:
      model: lisl2d              # lisl2d | lisl1d | laplace2d | problem | matrix_market
      sigmas: [2.0, 2.2360679775]
      levels: [6, 7, 8, 9]
      solvers: [agmg, gmg]
      solver_params: {gmg: {n_levels: 5}}

``lfa`` takes ``lfa: {configs: [{m1, m2, gamma1, gamma2, mode}], resolution}``
and ``spectrum`` takes ``spectrum: {cases: [[N, m], ...]}``.

The environment variable ``LISL_HJB_OUTPUT_DIR`` overrides ``output.dir``.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

import yaml

from ..stencil import BoundaryMode, SchemeId

KINDS = ("convergence", "stability", "solver_bench", "lfa", "spectrum")
DT_RULES = ("T", "dx", "dx_over_4", "dx_1p5", "dx_sq")
OUTPUT_ENV = "LISL_HJB_OUTPUT_DIR"
THREADS_ENV = "LISL_HJB_THREADS"
DEFAULT_SEED = 42


class ConfigError(ValueError):
    pass


@dataclass
class SolverConfig:
    name: str = "agmg"
    tol: float = 1e-6
    max_iters: int = 500
    params: dict = field(default_factory=dict)


@dataclass
class OutputConfig:
    dir: str = "results"
    name: str = "experiment"
    formats: list[str] = field(default_factory=lambda: ["csv"])

    def resolved_dir(self) -> Path:
        return Path(os.environ.get(OUTPUT_ENV) or self.dir)


@dataclass
class BenchConfig:
    model: str = "lisl2d"
    sigmas: list[float] = field(default_factory=lambda: [2.0])
    levels: list[int] = field(default_factory=lambda: [6, 7, 8])
    solvers: list[str] = field(default_factory=lambda: ["agmg"])
    solver_params: dict = field(default_factory=dict)
    meshes: list[int] = field(default_factory=list)
    matrix_path: Optional[str] = None


@dataclass
class ExperimentConfig:
    kind: str = "convergence"
    problem: str = "ProblemA"
    scheme: int = 2
    theta: float = 1.0
    boundary_mode: str = "truncate"
    use_exact_boundary: bool = True
    meshes: list[int] = field(default_factory=lambda: [41, 81, 161])
    dt: Union[str, float] = "T"
    n_alpha: int = 40
    policy_tol: float = 1e-8
    solver: SolverConfig = field(default_factory=SolverConfig)
    seed: int = DEFAULT_SEED
    output: OutputConfig = field(default_factory=OutputConfig)
    bench: BenchConfig = field(default_factory=BenchConfig)
    lfa: dict = field(default_factory=dict)
    spectrum: dict = field(default_factory=dict)

    def validate(self) -> "ExperimentConfig":
        if self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not 0.0 <= float(self.theta) <= 1.0:
            raise ConfigError("theta must lie in [0, 1]")
        try:
            SchemeId.parse(self.scheme)
            BoundaryMode.parse(self.boundary_mode)
        except (ValueError, KeyError) as exc:
            raise ConfigError(str(exc)) from exc
        if isinstance(self.dt, str) and self.dt not in DT_RULES:
            raise ConfigError(f"dt must be a number or one of {DT_RULES}, got {self.dt!r}")
        if not isinstance(self.dt, str) and float(self.dt) <= 0:
            raise ConfigError("dt must be positive")
        if any(int(n) < 3 for n in self.meshes):
            raise ConfigError("meshes need at least 3 nodes per dimension")
        if self.n_alpha < 1:
            raise ConfigError("n_alpha must be >= 1")
        for fmt in self.output.formats:
            if fmt not in ("csv", "json", "markdown"):
                raise ConfigError(f"unknown output format {fmt!r}")
        return self

    def to_dict(self) -> dict:
        return asdict(self)


def _build(cls, data: Optional[dict], section: str):
    data = dict(data or {})
    known = set(cls.__dataclass_fields__)
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unknown keys in {section}: {sorted(extra)}")
    return cls(**data)


def config_from_dict(data: dict[str, Any]) -> ExperimentConfig:
    data = dict(data or {})
    nested = {
        "solver": SolverConfig, "output": OutputConfig, "bench": BenchConfig,
    }
    for key, cls in nested.items():
        if key in data:
            data[key] = _build(cls, data[key], key)
    cfg = _build(ExperimentConfig, data, "config")
    if isinstance(cfg.dt, (int, float)) and not isinstance(cfg.dt, bool):
        cfg.dt = float(cfg.dt)
    return cfg.validate()


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping at top level")
    return config_from_dict(data)


def dump_config(cfg: ExperimentConfig, path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(cfg.to_dict(), fh, sort_keys=False)


def resolve_dt(rule: Union[str, float], dx: float, T: float) -> float:
    """Time step for a mesh width ``dx`` and horizon ``T``."""
    if not isinstance(rule, str):
        return float(rule)
    table = {"T": T, "dx": dx, "dx_over_4": dx / 4.0, "dx_1p5": dx**1.5, "dx_sq": dx**2}
    if rule not in table:
        raise ConfigError(f"unknown dt rule {rule!r}")
    return float(table[rule])
