"""
Problem generators, a-posteriori analysis and the batch driver.

Two problem families are generated: random robust MILPs with interval
uncertainty on the constraint matrix, and a sensor-localization problem whose
anchor positions are uncertain within a small disk.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
import dataclasses
from dataclasses import dataclass, field
import logging
import math
from typing import Callable, Iterable, Sequence

import networkx as nx
import numpy as np

from .config import GRAPH_RESAMPLING_CAP, POINT_MATCH_TOL, FEASIBILITY_TOL, SimConfig, SolverConfig
from .errors import ResamplingCapError
from .geometry import (
    Basis,
    ConstraintSystem,
    LinearConstraint,
    MixedIntegerSpace,
    Point,
    helly_number,
)
from .instance import Instance
from .network import EdgeSchedule, SimulationResult, diameter, generate_knn_digraph, run_simulation, substream
from .node import NodeState, halt_threshold, node_init
from .report import RunRecord
from .solver import SolveResult, solve_mip
from .uncertainty import (
    SampleSchedule,
    UncertainConstraintSet,
    draw_multisample,
    scenario_bound,
    split_levels,
)

logger = logging.getLogger(__name__)

# Localization box faces and the objective that yields each one.
FACES: dict[str, tuple[float, float]] = {
    "x_lower": (1.0, 0.0),
    "y_lower": (0.0, 1.0),
    "x_upper": (-1.0, 0.0),
    "y_upper": (0.0, -1.0),
}


# ============================================================================
# RANDOM ROBUST MILP
# ============================================================================

@dataclass(frozen=True)
class MilpInstanceSpec:
    n: int = 10
    constraints_per_node: int = 100
    d_Z: int = 2
    d_R: int = 3
    rho: float = 0.2
    gamma: float = 20.0
    epsilon: float = 0.1
    delta: float = 1e-9
    degree: int = 3
    diameter: int = 4
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n < 1 or self.constraints_per_node < 1:
            raise ValueError("need at least one node and one constraint per node")
        if self.gamma <= 1.0:
            raise ValueError("gamma must exceed 1")
        if self.rho < 0:
            raise ValueError("rho must be non-negative")
        if self.n > 1 and not 1 <= self.degree < self.n:
            raise ValueError("degree must lie in [1, n)")
        MixedIntegerSpace(self.d_Z, self.d_R)
        split_levels(self.epsilon, self.delta, self.n)

    @property
    def space(self) -> MixedIntegerSpace:
        return MixedIntegerSpace(self.d_Z, self.d_R)


def generate_random_milp(
    spec: MilpInstanceSpec, rng: np.random.Generator
) -> tuple[list[UncertainConstraintSet], np.ndarray]:
    """Gaussian nominal rows, b = gamma * ||row||, a Gaussian objective shared by all nodes."""
    d = spec.space.d
    sets = []
    for i in range(1, spec.n + 1):
        A0 = rng.standard_normal((spec.constraints_per_node, d))
        b = spec.gamma * np.linalg.norm(A0, axis=1)
        sets.append(UncertainConstraintSet.interval_matrix(i, A0, b, spec.rho))
    c = rng.standard_normal(d)
    return sets, c


def build_milp_instance(spec: MilpInstanceSpec) -> Instance:
    sets, c = generate_random_milp(spec, substream(spec.seed, 0, "milp"))
    if spec.n == 1:
        schedule = EdgeSchedule.static(1, ())
    else:
        schedule = generate_knn_digraph(spec.n, spec.degree, spec.diameter, substream(spec.seed, 0, "graph"))
    eps_i, delta_i = split_levels(spec.epsilon, spec.delta, spec.n)
    return Instance(
        kind="milp",
        seed=spec.seed,
        space=spec.space,
        objective=tuple(float(v) for v in c),
        sets=tuple(sets),
        schedule=schedule,
        epsilons=(eps_i,) * spec.n,
        deltas=(delta_i,) * spec.n,
        epsilon=spec.epsilon,
        delta=spec.delta,
    )


# ============================================================================
# SENSOR LOCALIZATION
# ============================================================================

@dataclass(frozen=True)
class LocalizationSpec:
    side: float = 10.0
    n: int = 10
    comm_range: float = 7.0
    alpha_deg: float = 20.0
    laser_fraction: float = 0.5
    rho: float = 0.1
    sides: int = 16
    face: str = "x_lower"
    epsilon: float = 0.1
    delta: float = 1e-9
    seed: int = 0

    def __post_init__(self) -> None:
        if self.side <= 0 or self.comm_range <= 0:
            raise ValueError("area side and range must be positive")
        if not 0.0 < self.alpha_deg < 180.0:
            raise ValueError("alpha must lie in (0, 180) degrees")
        if self.sides < 3:
            raise ValueError("polygon needs at least 3 sides")
        if not 0.0 <= self.laser_fraction <= 1.0:
            raise ValueError("laser fraction must lie in [0, 1]")
        if self.rho < 0:
            raise ValueError("rho must be non-negative")
        if self.face not in FACES:
            raise ValueError(f"unknown face {self.face!r}; expected one of {sorted(FACES)}")
        split_levels(self.epsilon, self.delta, self.n)


@dataclass(frozen=True)
class LocalizationProblem:
    sets: list[UncertainConstraintSet]
    objective: np.ndarray
    truth: np.ndarray
    anchors: np.ndarray
    lasers: frozenset[int]
    edges: frozenset[tuple[int, int]]


def polygon_normals(sides: int) -> np.ndarray:
    """Outward normals of a regular polygon; with offset r it circumscribes the disk of radius r."""
    angles = 2.0 * np.pi * np.arange(sides) / sides
    return np.column_stack([np.cos(angles), np.sin(angles)])


def cone_rows(bearing: float, alpha: float, reach: float) -> tuple[np.ndarray, np.ndarray]:
    """Two half-planes bounding a cone of half-angle alpha/2 about ``bearing`` plus a range cut."""
    upper, lower = bearing + alpha / 2.0, bearing - alpha / 2.0
    normals = np.array([
        [-math.sin(upper), math.cos(upper)],
        [math.sin(lower), -math.cos(lower)],
        [math.cos(bearing), math.sin(bearing)],
    ])
    return normals, np.array([0.0, 0.0, reach])


def _area_rows(side: float) -> tuple[np.ndarray, np.ndarray]:
    return np.array([[-1.0, 0.0], [1.0, 0.0], [0.0, -1.0], [0.0, 1.0]]), np.array([0.0, side, 0.0, side])


def generate_localization(
    spec: LocalizationSpec,
    rng: np.random.Generator,
    cap: int = GRAPH_RESAMPLING_CAP,
) -> LocalizationProblem:
    """
    Place n anchors and one unknown sensor in the square and build every
    anchor's constraints from the true geometry.

    Anchors within range of the unknown sensor constrain it: laser anchors by
    a bearing cone with range cut, the others by the circumscribed polygon of
    the range disk. Every anchor also knows the deployment square.
    """
    alpha = math.radians(spec.alpha_deg)
    area_A, area_b = _area_rows(spec.side)
    n_lasers = int(round(spec.n * spec.laser_fraction))
    for attempt in range(1, cap + 1):
        anchors = rng.uniform(0.0, spec.side, size=(spec.n, 2))
        truth = rng.uniform(0.0, spec.side, size=2)
        lasers = frozenset(int(i) + 1 for i in rng.choice(spec.n, size=n_lasers, replace=False))
        dist = np.linalg.norm(anchors[:, None, :] - anchors[None, :, :], axis=2)
        edges = frozenset(
            (i + 1, j + 1) for i in range(spec.n) for j in range(spec.n) if i != j and dist[i, j] < spec.comm_range
        )
        graph = nx.DiGraph()
        graph.add_nodes_from(range(1, spec.n + 1))
        graph.add_edges_from(edges)
        to_truth = np.linalg.norm(anchors - truth, axis=1)
        if not nx.is_strongly_connected(graph) or not np.any(to_truth < spec.comm_range):
            continue
        sets = []
        for i in range(1, spec.n + 1):
            center = anchors[i - 1]
            if to_truth[i - 1] >= spec.comm_range:
                normals, offsets = np.zeros((0, 2)), np.zeros(0)
            elif i in lasers:
                bearing = math.atan2(truth[1] - center[1], truth[0] - center[0])
                normals, offsets = cone_rows(bearing, alpha, spec.comm_range)
            else:
                normals = polygon_normals(spec.sides)
                offsets = np.full(spec.sides, spec.comm_range)
            sets.append(UncertainConstraintSet.ball_center(
                i, center, spec.rho, normals, offsets, fixed_rows=area_A, fixed_offsets=area_b
            ))
        logger.debug("localization geometry accepted after %d draws", attempt)
        return LocalizationProblem(sets, np.asarray(FACES[spec.face]), truth, anchors, lasers, edges)
    raise ResamplingCapError(f"no connected localization geometry in {cap} draws")


def build_localization_instance(spec: LocalizationSpec) -> Instance:
    problem = generate_localization(spec, substream(spec.seed, 0, "localization"))
    eps_i, delta_i = split_levels(spec.epsilon, spec.delta, spec.n)
    return Instance(
        kind="localization",
        seed=spec.seed,
        space=MixedIntegerSpace(0, 2),
        objective=tuple(float(v) for v in problem.objective),
        sets=tuple(problem.sets),
        schedule=EdgeSchedule.static(spec.n, problem.edges),
        epsilons=(eps_i,) * spec.n,
        deltas=(delta_i,) * spec.n,
        truth=tuple(float(v) for v in problem.truth),
        epsilon=spec.epsilon,
        delta=spec.delta,
    )


# ============================================================================
# RUNS
# ============================================================================

def build_nodes(
    instance: Instance,
    sim: SimConfig | None = None,
    solver: SolverConfig | None = None,
) -> list[NodeState]:
    """Initialize one node per uncertain set with the run's halting threshold."""
    sim = sim or SimConfig()
    schedule = instance.schedule
    D = diameter(schedule.n, schedule.base_edges) if sim.halt_mode == "2D+1" else None
    threshold = halt_threshold(instance.n, schedule.L, sim.halt_mode, D)
    h = helly_number(instance.space)
    nodes = []
    for uset, eps, dlt in zip(instance.sets, instance.epsilons, instance.deltas):
        bound = scenario_bound(eps, dlt, h) if sim.scenario_mode != "off" else None
        nodes.append(node_init(
            uset.owner,
            uset,
            instance.objective,
            instance.space,
            SampleSchedule(eps, dlt),
            halt_threshold=threshold,
            r=sim.r,
            solver_config=solver,
            scenario_bound=bound,
        ))
    return nodes


def run_instance(
    instance: Instance,
    sim: SimConfig | None = None,
    solver: SolverConfig | None = None,
) -> tuple[SimulationResult, list[NodeState]]:
    nodes = build_nodes(instance, sim, solver)
    return run_simulation(nodes, instance.schedule, sim), nodes


def centralized_oracle(
    constraints: Iterable[LinearConstraint],
    objective: Sequence[float] | np.ndarray,
    space: MixedIntegerSpace,
    config: SolverConfig | None = None,
) -> SolveResult:
    """One solve over the union of all given constraints."""
    return solve_mip(ConstraintSystem.build(space, objective, constraints), config)


def sampled_problem_constraints(nodes: Sequence[NodeState]) -> list[LinearConstraint]:
    """Nominal rows plus every cached frozen draw of every node."""
    constraints: list[LinearConstraint] = []
    for node in nodes:
        constraints.extend(node.uncertain_set.nominal_constraints())
        if node.frozen_multisample is not None:
            for draw in node.frozen_multisample:
                constraints.extend(node.uncertain_set.realize(draw))
    return constraints


def posterior_violation(
    x: Point | np.ndarray,
    sets: Sequence[UncertainConstraintSet],
    N: int,
    rng: np.random.Generator,
    tol: float = FEASIBILITY_TOL,
    batch: int = 1000,
) -> float:
    """Fraction of N joint realizations under which x violates some node's constraints."""
    if N < 1:
        raise ValueError("N must be at least 1")
    vec = x.as_array() if isinstance(x, Point) else np.asarray(x, dtype=float)
    violations = 0
    for start in range(0, N, batch):
        size = min(batch, N - start)
        violated = np.zeros(size, dtype=bool)
        for uset in sets:
            if uset.n_rows == 0:
                continue
            values = draw_multisample(uset, size, rng).values
            violated |= (uset.residuals(vec, values) > tol).any(axis=1)
        violations += int(violated.sum())
    return violations / N


def posterior_cost_increase(
    basis: Basis,
    space: MixedIntegerSpace,
    objective: Sequence[float] | np.ndarray,
    sets: Sequence[UncertainConstraintSet],
    N: int,
    rng: np.random.Generator,
    config: SolverConfig | None = None,
) -> float:
    """
    Fraction of N fresh joint realizations whose constraints, added to the
    basis, raise its optimal cost.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    config = config or SolverConfig()
    base = solve_mip(ConstraintSystem.build(space, objective, basis), config)
    assert base.point is not None
    x = base.point.as_array()
    increases = 0
    for _ in range(N):
        added: list[LinearConstraint] = []
        violated = False
        for uset in sets:
            if uset.n_rows == 0:
                continue
            sample = draw_multisample(uset, 1, rng)
            violated |= bool((uset.residuals(x, sample.values) > config.feasibility_tol).any())
            added.extend(uset.realize(sample[0]))
        if not violated:
            continue
        result = solve_mip(ConstraintSystem.build(space, objective, list(basis) + added), config)
        if not result.is_optimal or result.cost > base.cost + config.optimality_tol * max(1.0, abs(base.cost)):
            increases += 1
    return increases / N


def solutions_agree(solutions: dict[int, Point], space: MixedIntegerSpace, tol: float = POINT_MATCH_TOL) -> bool:
    points = list(solutions.values())
    return all(p.matches(points[0], space, tol) for p in points[1:])


def summarize_run(
    instance: Instance,
    result: SimulationResult,
    nodes: Sequence[NodeState],
    posterior_samples: int = 0,
    solver: SolverConfig | None = None,
) -> RunRecord:
    """Averaged per-node metrics of one finished run."""
    first = nodes[0]
    assert first.candidate is not None and first.basis is not None
    rng = substream(instance.seed, 0, "posterior")
    violation = increase = None
    if posterior_samples > 0:
        violation = posterior_violation(first.candidate, instance.sets, posterior_samples, rng)
        increase = posterior_cost_increase(
            first.basis, instance.space, instance.objective, instance.sets, posterior_samples, rng, solver
        )
    return RunRecord(
        seed=instance.seed,
        outcome=result.outcome.value,
        rounds=result.stats.rounds,
        transmissions=float(np.mean(list(result.stats.transmissions.values()))),
        verifications=float(np.mean(list(result.stats.verifications.values()))),
        violation=violation,
        cost_increase=increase,
        cost=first.cost,
        agree=solutions_agree(result.solutions, instance.space),
        solution=first.candidate.coords,
    )


def run_batch(
    make_instance: Callable[[int], Instance],
    seeds: Sequence[int],
    sim: SimConfig | None = None,
    solver: SolverConfig | None = None,
    posterior_samples: int = 0,
    workers: int = 1,
) -> list[RunRecord]:
    """Independent runs over seeds, returned in seed order."""
    sim = sim or SimConfig()

    def one(seed: int) -> RunRecord:
        instance = make_instance(seed)
        result, nodes = run_instance(instance, dataclasses.replace(sim, seed=seed), solver)
        record = summarize_run(instance, result, nodes, posterior_samples, solver)
        logger.info("seed %d: %s after %d rounds, cost %.6g", seed, record.outcome, record.rounds, record.cost)
        return record

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, seeds))
    return [one(seed) for seed in seeds]


# ============================================================================
# LOCALIZATION BOX
# ============================================================================

@dataclass
class LocalizationRun:
    truth: tuple[float, float]
    box: dict[str, float]
    records: dict[str, RunRecord] = field(default_factory=dict)

    def contains_truth(self, tol: float = 1e-7) -> bool:
        x, y = self.truth
        return (
            self.box["x_lower"] - tol <= x <= self.box["x_upper"] + tol
            and self.box["y_lower"] - tol <= y <= self.box["y_upper"] + tol
        )


def run_localization(
    spec: LocalizationSpec,
    sim: SimConfig | None = None,
    solver: SolverConfig | None = None,
    posterior_samples: int = 0,
) -> LocalizationRun:
    """The four box faces as independent consensus runs on one geometry."""
    instance = build_localization_instance(spec)
    assert instance.truth is not None
    box: dict[str, float] = {}
    records: dict[str, RunRecord] = {}
    for face, direction in FACES.items():
        face_instance = instance.with_objective(direction)
        result, nodes = run_instance(face_instance, sim, solver)
        record = summarize_run(face_instance, result, nodes, posterior_samples, solver)
        records[face] = record
        box[face] = record.cost if face.endswith("lower") else -record.cost
    run = LocalizationRun((instance.truth[0], instance.truth[1]), box, records)
    logger.info("localization box x in [%.4f, %.4f], y in [%.4f, %.4f]; truth inside: %s",
                box["x_lower"], box["x_upper"], box["y_lower"], box["y_upper"], run.contains_truth())
    return run
