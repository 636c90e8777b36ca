"""
Round-based simulation of the consensus algorithm over time-varying digraphs.

Nodes are numbered 1..n. In round t the simulator realizes the edge set of
the schedule, delivers to every node the last transmitted basis of each live
in-neighbor, then lets every node verify and optimize. All randomness comes
from named substreams of one master seed, so a run is reproducible bit for
bit regardless of node processing order or the parallel runner.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
import hashlib
import logging
from typing import Iterable, Sequence

import networkx as nx
import numpy as np

from .config import GRAPH_RESAMPLING_CAP, SimConfig
from .errors import ConnectivityError, ResamplingCapError
from .geometry import Point
from .node import (
    NodeMessage,
    NodeState,
    check_halt,
    mark_all_frozen,
    node_optimization,
    node_verification,
    update_freeze,
)

logger = logging.getLogger(__name__)

Edge = tuple[int, int]


def substream(seed: int, ident: int, purpose: str) -> np.random.Generator:
    """Independent generator for (seed, id, purpose), stable across processes."""
    tag = int.from_bytes(hashlib.blake2b(purpose.encode("utf-8"), digest_size=8).digest(), "little")
    return np.random.default_rng(np.random.SeedSequence([seed, ident, tag]))


# ============================================================================
# COMMUNICATION SCHEDULES
# ============================================================================

class ScheduleMode(str, Enum):
    STATIC = "static"
    PERIODIC = "periodic"
    RANDOM_LOSS = "random-loss"


@dataclass(frozen=True)
class EdgeSchedule:
    """
    The communication graph G(t) on nodes 1..n.

    ``edge_sets`` holds the single edge set of a static or lossy schedule, or
    one edge set per step of a periodic schedule. ``L`` is the joint strong
    connectivity window.
    """

    n: int
    mode: ScheduleMode
    edge_sets: tuple[frozenset[Edge], ...]
    L: int = 1
    loss: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("schedule needs at least one node")
        if self.L < 1:
            raise ValueError("L must be at least 1")
        if not self.edge_sets:
            raise ValueError("schedule needs at least one edge set")
        if self.mode is not ScheduleMode.PERIODIC and len(self.edge_sets) != 1:
            raise ValueError(f"{self.mode.value} schedule takes exactly one edge set")
        if not 0.0 <= self.loss <= 1.0:
            raise ValueError("loss probability must lie in [0, 1]")
        for edges in self.edge_sets:
            for u, v in edges:
                if not (1 <= u <= self.n and 1 <= v <= self.n):
                    raise ValueError(f"edge ({u}, {v}) has a node id outside [1, {self.n}]")
                if u == v:
                    raise ValueError(f"self-loop on node {u}")

    @classmethod
    def static(cls, n: int, edges: Iterable[Edge], L: int = 1) -> "EdgeSchedule":
        return cls(n, ScheduleMode.STATIC, (frozenset(edges),), L)

    @classmethod
    def periodic(cls, n: int, edge_sets: Sequence[Iterable[Edge]], L: int | None = None) -> "EdgeSchedule":
        sets = tuple(frozenset(edges) for edges in edge_sets)
        return cls(n, ScheduleMode.PERIODIC, sets, L if L is not None else len(sets))

    @classmethod
    def random_loss(
        cls, n: int, edges: Iterable[Edge], loss: float, seed: int = 0, L: int = 1
    ) -> "EdgeSchedule":
        return cls(n, ScheduleMode.RANDOM_LOSS, (frozenset(edges),), L, loss, seed)

    @property
    def base_edges(self) -> frozenset[Edge]:
        return frozenset().union(*self.edge_sets)

    def edges_at(self, t: int) -> frozenset[Edge]:
        """Edge set of round t (t >= 0)."""
        if self.mode is ScheduleMode.STATIC:
            return self.edge_sets[0]
        if self.mode is ScheduleMode.PERIODIC:
            return self.edge_sets[t % len(self.edge_sets)]
        edges = sorted(self.edge_sets[0])
        if not edges or self.loss == 0.0:
            return self.edge_sets[0]
        draws = substream(self.seed, t, "edge-loss").random(len(edges))
        return frozenset(e for e, u in zip(edges, draws) if u >= self.loss)


def _digraph(n: int, edges: Iterable[Edge]) -> nx.DiGraph:
    graph = nx.DiGraph()
    graph.add_nodes_from(range(1, n + 1))
    graph.add_edges_from(edges)
    return graph


def check_ujsc(schedule: EdgeSchedule, L: int | None = None, horizon: int = 100) -> bool:
    """
    True iff the union graph over every window of L consecutive rounds is
    strongly connected. Periodic schedules are checked over one period, lossy
    schedules over the first ``horizon`` rounds.
    """
    L = schedule.L if L is None else L
    if L < 1:
        raise ValueError("L must be at least 1")
    if schedule.mode is ScheduleMode.STATIC:
        return nx.is_strongly_connected(_digraph(schedule.n, schedule.edge_sets[0]))
    starts = len(schedule.edge_sets) if schedule.mode is ScheduleMode.PERIODIC else max(1, horizon - L + 1)
    for t in range(starts):
        union: set[Edge] = set()
        for s in range(t, t + L):
            union |= schedule.edges_at(s)
        if not nx.is_strongly_connected(_digraph(schedule.n, union)):
            return False
    return True


def diameter(n: int, edges: Iterable[Edge]) -> int:
    """Longest shortest directed path of a strongly connected graph."""
    graph = _digraph(n, edges)
    if not nx.is_strongly_connected(graph):
        raise ConnectivityError("diameter is undefined for a graph that is not strongly connected")
    if n == 1:
        return 0
    return int(nx.diameter(graph))


def knn_edges(points: np.ndarray, k: int) -> set[Edge]:
    """Link every point to its k nearest neighbors, both directions."""
    n = points.shape[0]
    dist = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=2)
    np.fill_diagonal(dist, np.inf)
    edges: set[Edge] = set()
    for i in range(n):
        for j in np.argsort(dist[i], kind="stable")[:k]:
            edges.add((i + 1, int(j) + 1))
            edges.add((int(j) + 1, i + 1))
    return edges


def generate_knn_digraph(
    n: int,
    k: int,
    target_diameter: int,
    rng: np.random.Generator,
    cap: int = GRAPH_RESAMPLING_CAP,
) -> EdgeSchedule:
    """Random k-nearest-neighbor graph on the unit square with the given diameter."""
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < n, got k={k}, n={n}")
    for attempt in range(1, cap + 1):
        edges = knn_edges(rng.uniform(0.0, 1.0, size=(n, 2)), k)
        graph = _digraph(n, edges)
        if nx.is_strongly_connected(graph) and nx.diameter(graph) == target_diameter:
            logger.debug("kNN graph with diameter %d found after %d draws", target_diameter, attempt)
            return EdgeSchedule.static(n, edges)
    raise ResamplingCapError(
        f"no {k}-NN graph on {n} nodes with diameter {target_diameter} in {cap} draws"
    )


# ============================================================================
# SIMULATION
# ============================================================================

class EventKind(str, Enum):
    VERIFY = "verify"
    OPTIMIZE = "optimize"
    TRANSMIT = "transmit"
    HALT = "halt"
    FREEZE = "freeze"


@dataclass(frozen=True)
class TraceEvent:
    t: int
    node: int
    event: EventKind
    cost: float
    basis_size: int
    k: int
    point: tuple[float, ...]


class SimulationOutcome(str, Enum):
    HALTED = "halted"
    MAX_ROUNDS = "max-rounds"


@dataclass
class RunStats:
    rounds: int = 0
    transmissions: dict[int, int] = field(default_factory=dict)
    verifications: dict[int, int] = field(default_factory=dict)
    halt_round: dict[int, int | None] = field(default_factory=dict)
    frozen: dict[int, bool] = field(default_factory=dict)
    all_frozen_round: int | None = None
    # Node halted after learning every node froze, i.e. on the final sampled problem.
    halted_on_frozen: dict[int, bool] = field(default_factory=dict)


@dataclass
class SimulationResult:
    outcome: SimulationOutcome
    traces: list[TraceEvent]
    solutions: dict[int, Point]
    stats: RunStats

    @property
    def halted(self) -> bool:
        return self.outcome is SimulationOutcome.HALTED


def _event(t: int, node: NodeState, kind: EventKind) -> TraceEvent:
    assert node.candidate is not None
    return TraceEvent(t, node.id, kind, node.cost, node.basis_size, node.k, node.candidate.coords)


def _step(
    node: NodeState,
    t: int,
    inbox: list[NodeMessage],
    rng: np.random.Generator,
    config: SimConfig,
) -> list[TraceEvent]:
    """One round of one node; touches nothing but the node's own state."""
    if node.halted:
        return []
    events: list[TraceEvent] = []
    verify_round = not config.staggered or t % 2 == 1
    optimize_round = not config.staggered or t % 2 == 0 or t == 1
    if verify_round:
        k_before, pending = node.k, node.needs_verification
        node_verification(node, rng)
        if pending:
            events.append(_event(t, node, EventKind.VERIFY))
        if config.scenario_mode != "off":
            was_frozen = node.frozen
            update_freeze(node, inbox if config.scenario_mode == "piggyback" else [])
            if node.frozen and not was_frozen:
                events.append(_event(t, node, EventKind.FREEZE))
        logger.debug("round %d node %d: k %d -> %d, %d certificates",
                     t, node.id, k_before, node.k, len(node.certificates))
    if optimize_round:
        msg = node_optimization(node, inbox, config.count_idle_rounds)
        events.append(_event(t, node, EventKind.OPTIMIZE))
        if msg is not None:
            events.append(_event(t, node, EventKind.TRANSMIT))
        if check_halt(node):
            node.halted = True
            events.append(_event(t, node, EventKind.HALT))
            logger.info("node %d halted at round %d with cost %.9g%s", node.id, t, node.cost,
                        " (all nodes frozen)" if node.all_frozen_seen else "")
    return events


def run_simulation(
    nodes: Sequence[NodeState],
    schedule: EdgeSchedule,
    config: SimConfig | None = None,
) -> SimulationResult:
    """
    Run the algorithm until every node halts or the round budget is spent.

    Deliveries of round t are fixed before any node executes in round t,
    so processing order does not affect the outcome.
    """
    config = config or SimConfig()
    by_id = {node.id: node for node in nodes}
    if sorted(by_id) != list(range(1, schedule.n + 1)):
        raise ValueError(f"node ids must be exactly 1..{schedule.n}")
    if not check_ujsc(schedule, horizon=config.max_rounds):
        if not config.force:
            raise ConnectivityError(f"schedule is not jointly strongly connected with L={schedule.L}")
        logger.warning("running on a schedule that is not jointly strongly connected (forced)")

    rngs = {i: substream(config.seed, i, "verification") for i in by_id}
    order_rng = substream(config.seed, 0, "order")
    mailboxes: dict[int, dict[int, NodeMessage]] = {i: {} for i in by_id}
    stats = RunStats(halt_round={i: None for i in by_id}, halted_on_frozen={i: False for i in by_id})
    traces: list[TraceEvent] = []
    outcome = SimulationOutcome.MAX_ROUNDS
    logger.info("simulating %d nodes for at most %d rounds (seed %d)", len(nodes), config.max_rounds, config.seed)

    executor = ThreadPoolExecutor(max_workers=config.workers) if config.parallel else None
    try:
        for t in range(1, config.max_rounds + 1):
            for u, v in sorted(schedule.edges_at(t - 1)):
                sender = by_id[u]
                if sender.last_transmitted is not None:
                    mailboxes[v][u] = sender.message()

            ids = sorted(by_id)
            if config.order == "shuffled":
                ids = [int(i) for i in order_rng.permutation(ids)]
            consume = not config.staggered or t % 2 == 0 or t == 1
            inboxes = {i: [mailboxes[i][s] for s in sorted(mailboxes[i])] for i in ids}
            if consume:
                for i in ids:
                    mailboxes[i].clear()

            if executor is not None:
                futures = {i: executor.submit(_step, by_id[i], t, inboxes[i], rngs[i], config) for i in ids}
                round_events = {i: fut.result() for i, fut in futures.items()}
            else:
                round_events = {i: _step(by_id[i], t, inboxes[i], rngs[i], config) for i in ids}
            for i in sorted(round_events):
                traces.extend(round_events[i])
                if by_id[i].halted and stats.halt_round[i] is None:
                    stats.halt_round[i] = t
                    stats.halted_on_frozen[i] = by_id[i].all_frozen_seen

            if config.scenario_mode == "oracle" and all(node.frozen for node in nodes):
                for node in nodes:
                    mark_all_frozen(node)
            if stats.all_frozen_round is None and any(node.all_frozen_seen for node in nodes):
                stats.all_frozen_round = t

            stats.rounds = t
            if all(node.halted for node in nodes):
                outcome = SimulationOutcome.HALTED
                break
    finally:
        if executor is not None:
            executor.shutdown(wait=True)

    if outcome is SimulationOutcome.MAX_ROUNDS:
        logger.warning("%d of %d nodes still running after %d rounds",
                       sum(not node.halted for node in nodes), len(nodes), config.max_rounds)
    for i, node in by_id.items():
        stats.transmissions[i] = node.transmissions
        stats.verifications[i] = node.k
        stats.frozen[i] = node.frozen
    solutions = {i: node.candidate for i, node in by_id.items() if node.candidate is not None}
    logger.info("simulation finished: %s after %d rounds", outcome.value, stats.rounds)
    return SimulationResult(outcome, traces, solutions, stats)
