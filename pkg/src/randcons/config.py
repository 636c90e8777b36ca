"""Tolerances, algorithm constants and run configuration."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
import json
from pathlib import Path
from typing import Any

# Numerical tolerances
FEASIBILITY_TOL = 1e-9
INTEGRALITY_TOL = 1e-6
OPTIMALITY_TOL = 1e-9
POINT_MATCH_TOL = 1e-7

# Solver limits
BOUNDING_BOX = 1e6
NODE_LIMIT = 20_000
BASIS_NODE_LIMIT = 2_000
SIMPLEX_ITERATION_CAP = 5_000
MAX_INTEGER_DIM = 30

# Verification schedule constants (ln xi(alpha) rounded, and alpha)
SCHEDULE_LOG_XI = 2.3
SCHEDULE_ALPHA = 1.1

# Analytical scenario bound factor e / (e - 1)
ALAMO_FACTOR = 1.582

# Counter threshold constants obtained by solving M_k >= analytical bound for k
THRESHOLD_DELTA_WEIGHT = 0.58
THRESHOLD_HELLY_WEIGHT = 1.58

# Consensus defaults
DEFAULT_CERTIFICATES = 1
MAX_CERTIFICATES = 10
DEFAULT_POLYGON_SIDES = 16
GRAPH_RESAMPLING_CAP = 10_000

HALT_MODES = ("2nL+1", "2D+1")
SCENARIO_MODES = ("off", "piggyback", "oracle")
NODE_ORDERS = ("ascending", "shuffled")
BRANCHING_RULES = ("most-fractional",)
TIE_BREAK_RULES = ("lexicographic",)


@dataclass(frozen=True)
class SolverConfig:
    """Settings of the mixed-integer solver."""

    feasibility_tol: float = FEASIBILITY_TOL
    integrality_tol: float = INTEGRALITY_TOL
    optimality_tol: float = OPTIMALITY_TOL
    node_limit: int = NODE_LIMIT
    basis_node_limit: int = BASIS_NODE_LIMIT
    iteration_cap: int = SIMPLEX_ITERATION_CAP
    bounding_box: float | None = BOUNDING_BOX
    branching_rule: str = "most-fractional"
    tie_break: str = "lexicographic"

    def __post_init__(self) -> None:
        if self.feasibility_tol <= 0 or self.integrality_tol <= 0 or self.optimality_tol <= 0:
            raise ValueError("solver tolerances must be positive")
        if self.node_limit < 1 or self.basis_node_limit < 1 or self.iteration_cap < 1:
            raise ValueError("solver limits must be positive")
        if self.bounding_box is not None and self.bounding_box <= 0:
            raise ValueError("bounding box half-width must be positive")
        if self.branching_rule not in BRANCHING_RULES:
            raise ValueError(f"unknown branching rule: {self.branching_rule}")
        if self.tie_break not in TIE_BREAK_RULES:
            raise ValueError(f"unknown tie-break rule: {self.tie_break}")


@dataclass(frozen=True)
class SimConfig:
    """Settings of one simulated run of the consensus algorithm."""

    seed: int = 0
    max_rounds: int = 500
    halt_mode: str = "2nL+1"
    scenario_mode: str = "off"
    r: int = DEFAULT_CERTIFICATES
    staggered: bool = False
    count_idle_rounds: bool = True
    order: str = "ascending"
    parallel: bool = False
    workers: int = 4
    force: bool = False

    def __post_init__(self) -> None:
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be at least 1")
        if self.halt_mode not in HALT_MODES:
            raise ValueError(f"unknown halt mode: {self.halt_mode}")
        if self.scenario_mode not in SCENARIO_MODES:
            raise ValueError(f"unknown scenario mode: {self.scenario_mode}")
        if not 1 <= self.r <= MAX_CERTIFICATES:
            raise ValueError(f"r must lie in [1, {MAX_CERTIFICATES}]")
        if self.order not in NODE_ORDERS:
            raise ValueError(f"unknown node order: {self.order}")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")


def _apply_overrides(base: Any, overrides: dict[str, Any], section: str) -> Any:
    """Return a copy of a config dataclass with the given fields replaced."""
    known = {field.name for field in dataclasses.fields(base)}
    unknown = sorted(set(overrides) - known)
    if unknown:
        raise ValueError(f"unknown {section} config keys: {', '.join(unknown)}")
    return dataclasses.replace(base, **overrides)


def load_config(
    path: str | Path,
    solver: SolverConfig | None = None,
    sim: SimConfig | None = None,
) -> tuple[SolverConfig, SimConfig]:
    """
    Load solver and simulation overrides from a JSON file.

    The file holds up to two objects, ``solver`` and ``sim``, whose keys are
    field names of :class:`SolverConfig` and :class:`SimConfig`.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")
    data = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise ValueError("config file must contain a JSON object")
    unknown = sorted(set(data) - {"solver", "sim"})
    if unknown:
        raise ValueError(f"unknown config sections: {', '.join(unknown)}")
    solver = _apply_overrides(solver or SolverConfig(), data.get("solver", {}), "solver")
    sim = _apply_overrides(sim or SimConfig(), data.get("sim", {}), "sim")
    return solver, sim
