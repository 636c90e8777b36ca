"""
Per-node state machine of the randomized constraints consensus algorithm.

A node alternates a verification step (sample the local uncertainty, look
for realizations violated by the candidate) and an optimization step (solve
the problem formed by the violated rows, its own basis and the bases received
from in-neighbors). It halts once its candidate has stayed unchanged for a
configured number of rounds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import logging
from typing import Sequence

import numpy as np

from .config import DEFAULT_CERTIFICATES, POINT_MATCH_TOL, SolverConfig
from .errors import (
    InfeasibleSubproblemError,
    NodeLimitError,
    UnboundedSubproblemError,
)
from .geometry import (
    Basis,
    ConstraintSystem,
    LinearConstraint,
    MixedIntegerSpace,
    Point,
    combinatorial_dimension,
)
from .solver import SolveResult, SolveStatus, solve_mip
from .uncertainty import (
    Multisample,
    SampleSchedule,
    UncertainConstraintSet,
    ViolationCertificate,
    draw_multisample,
    sample_size,
    scan_multisample,
)

logger = logging.getLogger(__name__)

COST_MONOTONICITY_TOL = 1e-9


@dataclass(frozen=True)
class NodeMessage:
    """What a node sends to its out-neighbors: its basis and two freeze flags."""

    sender: int
    basis: Basis
    frozen: bool = False
    all_frozen: bool = False


@dataclass
class NodeState:
    id: int
    space: MixedIntegerSpace
    objective: tuple[float, ...]
    uncertain_set: UncertainConstraintSet
    schedule: SampleSchedule
    halt_threshold: int
    r: int = DEFAULT_CERTIFICATES
    solver_config: SolverConfig = field(default_factory=SolverConfig)
    scenario_bound: int | None = None

    candidate: Point | None = None
    basis: Basis | None = None
    unchanged: int = 0
    needs_verification: bool = True
    certificates: list[ViolationCertificate] = field(default_factory=list)
    draws_taken: int = 0
    last_multisample: Multisample | None = field(default=None, repr=False)

    frozen: bool = False
    frozen_multisample: Multisample | None = field(default=None, repr=False)
    all_frozen_seen: bool = False
    frozen_streak: int = 0

    last_transmitted: Basis | None = None
    transmissions: int = 0
    halted: bool = False

    _solved_key: tuple[LinearConstraint, ...] | None = field(default=None, repr=False)
    _solved: SolveResult | None = field(default=None, repr=False)

    @property
    def cost(self) -> float:
        if self.basis is None:
            raise RuntimeError(f"node {self.id} is not initialized")
        return self.basis.cost

    @property
    def k(self) -> int:
        return self.schedule.k

    @property
    def basis_size(self) -> int:
        return 0 if self.basis is None else len(self.basis)

    def message(self) -> NodeMessage:
        """The last transmitted basis stamped with the current freeze flags."""
        if self.last_transmitted is None:
            raise RuntimeError(f"node {self.id} has not transmitted yet")
        return NodeMessage(self.id, self.last_transmitted, self.frozen, self.all_frozen_seen)


def halt_threshold(n: int, L: int = 1, mode: str = "2nL+1", diameter: int | None = None) -> int:
    """Number of unchanged rounds after which a node may stop."""
    if mode == "2nL+1":
        if n < 1 or L < 1:
            raise ValueError("n and L must be positive")
        return 2 * n * L + 1
    if mode == "2D+1":
        if diameter is None or diameter < 0:
            raise ValueError("2D+1 mode needs the graph diameter")
        return 2 * diameter + 1
    raise ValueError(f"unknown halt mode: {mode}")


def _raise_for_status(node_id: int, result: SolveResult) -> None:
    if result.status is SolveStatus.INFEASIBLE:
        raise InfeasibleSubproblemError(f"local problem of node {node_id} is infeasible")
    if result.status is SolveStatus.UNBOUNDED:
        raise UnboundedSubproblemError(f"local problem of node {node_id} is unbounded")
    if result.status is SolveStatus.NODE_LIMIT:
        raise NodeLimitError(f"local problem of node {node_id} hit the branch-and-bound node limit")


def _constraint_key(con: LinearConstraint) -> tuple:
    p = con.provenance
    return (con.a, con.b, p.node, p.kind, -1 if p.sample is None else p.sample, p.row)


def _solve_local(state: NodeState, constraints: Sequence[LinearConstraint]) -> SolveResult:
    # Canonical row order: the same constraint set always gives the same solve.
    ordered = sorted(dict.fromkeys(constraints), key=_constraint_key)
    system = ConstraintSystem.build(state.space, state.objective, ordered)
    if state._solved is not None and system.constraints == state._solved_key:
        return state._solved
    result = solve_mip(system, state.solver_config)
    _raise_for_status(state.id, result)
    state._solved_key = system.constraints
    state._solved = result
    return result


def node_init(
    node_id: int,
    uncertain_set: UncertainConstraintSet,
    objective: Sequence[float] | np.ndarray,
    space: MixedIntegerSpace,
    schedule: SampleSchedule,
    *,
    halt_threshold: int,
    r: int = DEFAULT_CERTIFICATES,
    solver_config: SolverConfig | None = None,
    scenario_bound: int | None = None,
) -> NodeState:
    """Set k_i = 1 and solve the node's nominal problem for x^i(1), B^i(1)."""
    if halt_threshold < 1:
        raise ValueError("halt threshold must be at least 1")
    if uncertain_set.dim != space.d:
        raise ValueError(f"node {node_id}: set dimension {uncertain_set.dim} != space {space.d}")
    schedule.k = 1
    state = NodeState(
        id=node_id,
        space=space,
        objective=tuple(float(v) for v in objective),
        uncertain_set=uncertain_set,
        schedule=schedule,
        halt_threshold=halt_threshold,
        r=r,
        solver_config=solver_config or SolverConfig(),
        scenario_bound=scenario_bound,
    )
    result = _solve_local(state, uncertain_set.nominal_constraints())
    state.candidate = result.point
    state.basis = result.basis
    logger.debug("node %d initialized: cost %.6g, basis size %d", node_id, state.cost, state.basis_size)
    return state


def node_verification(state: NodeState, rng: np.random.Generator) -> list[ViolationCertificate]:
    """Look for violated realizations at the candidate, unless it did not move."""
    state.certificates = []
    if state.halted or not state.needs_verification:
        return []
    state.needs_verification = False
    assert state.candidate is not None
    if state.frozen and state.frozen_multisample is not None:
        multisample = state.frozen_multisample
    else:
        size = sample_size(state.schedule)
        multisample = draw_multisample(state.uncertain_set, size, rng, state.draws_taken)
        state.draws_taken += size
        state.last_multisample = multisample
        state.schedule.advance()
    state.certificates = scan_multisample(state.candidate, state.uncertain_set, multisample, state.r)
    return state.certificates


def node_optimization(
    state: NodeState,
    incoming: Sequence[NodeMessage],
    count_idle: bool = True,
) -> NodeMessage | None:
    """
    Re-solve over certificates, own basis and incoming bases.

    Returns a message only when the new basis differs from the last one sent.
    The very first call always transmits.
    """
    if state.halted:
        return None
    assert state.basis is not None and state.candidate is not None
    if not incoming and not state.certificates and not count_idle and state.last_transmitted is not None:
        return None
    constraints: list[LinearConstraint] = []
    for certificate in state.certificates:
        constraints.extend(certificate.constraints)
    constraints.extend(state.basis)
    for msg in incoming:
        constraints.extend(msg.basis)
    result = _solve_local(state, constraints)
    assert result.point is not None and result.basis is not None

    previous_cost = state.basis.cost
    if result.cost < previous_cost - COST_MONOTONICITY_TOL * max(1.0, abs(previous_cost)):
        logger.warning("node %d cost decreased from %.12g to %.12g", state.id, previous_cost, result.cost)
    if len(result.basis) > combinatorial_dimension(state.space):
        logger.warning("node %d basis has %d constraints", state.id, len(result.basis))

    if result.point.matches(state.candidate, state.space, POINT_MATCH_TOL):
        # Same point up to round-off: keep the held candidate and cost.
        state.unchanged = min(state.unchanged + 1, state.halt_threshold)
        state.basis = Basis(result.basis.constraints, previous_cost)
    else:
        state.unchanged = 0
        state.needs_verification = True
        state.candidate = result.point
        state.basis = result.basis
    state.certificates = []

    if state.basis.same_constraints(state.last_transmitted):
        return None
    state.last_transmitted = state.basis
    state.transmissions += 1
    return state.message()


def check_halt(state: NodeState) -> bool:
    return state.unchanged >= state.halt_threshold


def update_freeze(state: NodeState, incoming: Sequence[NodeMessage]) -> NodeState:
    """
    Scenario stop and global freeze detection via piggybacked flags.

    A node freezes after a draw whose size reached the scenario bound and
    re-uses that draw from then on. ``all_frozen_seen`` is raised once the
    node and every sender it hears from have reported frozen for
    ``halt_threshold`` rounds in a row, or when a sender already saw it.
    The flag does not change when a node halts; it is reported per node as
    ``RunStats.halted_on_frozen`` and in the halt log line.
    """
    if state.scenario_bound is None:
        return state
    last = state.last_multisample
    if not state.frozen and last is not None and len(last) >= state.scenario_bound:
        state.frozen = True
        state.frozen_multisample = last
        logger.info("node %d frozen at k=%d with %d cached draws", state.id, state.k, len(last))
    if state.frozen and incoming:
        if all(msg.frozen for msg in incoming):
            state.frozen_streak += 1
        else:
            state.frozen_streak = 0
    if not state.all_frozen_seen and (
        any(msg.all_frozen for msg in incoming) or state.frozen_streak >= state.halt_threshold
    ):
        mark_all_frozen(state)
    return state


def mark_all_frozen(state: NodeState) -> None:
    if not state.all_frozen_seen:
        state.all_frozen_seen = True
        logger.info("node %d observed that every node is frozen", state.id)
