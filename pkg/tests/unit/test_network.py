"""
Unit tests for communication schedules, graph tools and the simulator.
"""

import dataclasses
import itertools

import numpy as np
import pytest

from randcons.config import SimConfig
from randcons.errors import ConnectivityError, ResamplingCapError
from randcons.experiments import build_nodes, centralized_oracle
from randcons.geometry import MixedIntegerSpace
from randcons.instance import Instance
from randcons.network import (
    EdgeSchedule,
    EventKind,
    SimulationOutcome,
    check_ujsc,
    diameter,
    generate_knn_digraph,
    run_simulation,
    substream,
)
from randcons.report import trace_frame
from randcons.uncertainty import UncertainConstraintSet


def ring(n, both_ways=True):
    edges = {(i, i % n + 1) for i in range(1, n + 1)}
    if both_ways:
        edges |= {(v, u) for u, v in edges}
    return edges


def floyd_warshall(n, edges):
    dist = np.full((n, n), np.inf)
    np.fill_diagonal(dist, 0)
    for u, v in edges:
        dist[u - 1, v - 1] = 1
    for k in range(n):
        dist = np.minimum(dist, dist[:, [k]] + dist[[k], :])
    return int(dist.max())


def small_instance(n=4, rho=0.0, seed=0, edges=None):
    rng = np.random.default_rng(seed)
    space = MixedIntegerSpace(1, 1)
    sets = []
    for i in range(1, n + 1):
        A = rng.standard_normal((6, 2))
        sets.append(UncertainConstraintSet.interval_matrix(i, A, 20.0 * np.linalg.norm(A, axis=1), rho))
    return Instance(
        kind="milp",
        seed=seed,
        space=space,
        objective=tuple(rng.standard_normal(2)),
        sets=tuple(sets),
        schedule=EdgeSchedule.static(n, ring(n) if edges is None else edges),
        epsilons=(0.05,) * n,
        deltas=(1e-3,) * n,
    )


def simulate(instance, **overrides):
    sim = dataclasses.replace(SimConfig(max_rounds=200), **overrides)
    nodes = build_nodes(instance, sim)
    return run_simulation(nodes, instance.schedule, sim), nodes


class TestSchedules:
    def test_node_ids_validated(self):
        with pytest.raises(ValueError):
            EdgeSchedule.static(3, {(1, 4)})
        with pytest.raises(ValueError):
            EdgeSchedule.static(3, {(2, 2)})
        with pytest.raises(ValueError):
            EdgeSchedule.static(3, ring(3), L=0)

    def test_periodic_edges(self):
        schedule = EdgeSchedule.periodic(3, [{(1, 2)}, {(2, 3)}])
        assert schedule.L == 2
        assert schedule.edges_at(0) == {(1, 2)}
        assert schedule.edges_at(3) == {(2, 3)}

    def test_random_loss_extremes(self):
        keep = EdgeSchedule.random_loss(4, ring(4), 0.0, seed=1)
        drop = EdgeSchedule.random_loss(4, ring(4), 1.0, seed=1)
        assert keep.edges_at(5) == frozenset(ring(4))
        assert drop.edges_at(5) == frozenset()

    def test_random_loss_is_reproducible(self):
        a = EdgeSchedule.random_loss(6, ring(6), 0.5, seed=7)
        b = EdgeSchedule.random_loss(6, ring(6), 0.5, seed=7)
        assert [a.edges_at(t) for t in range(20)] == [b.edges_at(t) for t in range(20)]

    def test_substreams_differ_by_purpose_and_id(self):
        base = substream(0, 1, "verification").random(4)
        np.testing.assert_array_equal(base, substream(0, 1, "verification").random(4))
        assert not np.array_equal(base, substream(0, 2, "verification").random(4))
        assert not np.array_equal(base, substream(0, 1, "posterior").random(4))


class TestConnectivity:
    def test_static_strongly_connected(self):
        assert check_ujsc(EdgeSchedule.static(5, ring(5, both_ways=False)), 1)

    def test_alternating_graphs(self):
        schedule = EdgeSchedule.periodic(3, [{(1, 2), (2, 3)}, {(3, 1)}])
        assert check_ujsc(schedule, 2)
        assert not check_ujsc(schedule, 1)

    def test_isolated_node(self):
        schedule = EdgeSchedule.static(4, ring(3))
        for L in (1, 2, 5):
            assert not check_ujsc(schedule, L)

    def test_full_loss_breaks_connectivity(self):
        assert not check_ujsc(EdgeSchedule.random_loss(4, ring(4), 1.0), 3, horizon=10)


class TestDiameter:
    def test_complete_graph(self):
        edges = {(u, v) for u in range(1, 6) for v in range(1, 6) if u != v}
        assert diameter(5, edges) == 1

    def test_directed_ring(self):
        assert diameter(6, ring(6, both_ways=False)) == 5

    def test_not_strongly_connected(self):
        with pytest.raises(ConnectivityError):
            diameter(3, {(1, 2), (2, 3)})

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_floyd_warshall(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 9))
        edges = set(ring(n, both_ways=False))
        for u, v in itertools.permutations(range(1, n + 1), 2):
            if rng.random() < 0.2:
                edges.add((u, v))
        assert diameter(n, edges) == floyd_warshall(n, edges)


class TestKnnGraph:
    def test_two_nodes(self):
        schedule = generate_knn_digraph(2, 1, 1, np.random.default_rng(0))
        assert schedule.edges_at(0) == {(1, 2), (2, 1)}

    def test_target_diameter(self):
        schedule = generate_knn_digraph(10, 3, 4, np.random.default_rng(0))
        assert diameter(10, schedule.edges_at(0)) == 4
        assert check_ujsc(schedule, 1)

    def test_unattainable_diameter(self):
        with pytest.raises(ResamplingCapError):
            generate_knn_digraph(3, 2, 2, np.random.default_rng(0), cap=20)

    def test_degree_checked(self):
        with pytest.raises(ValueError):
            generate_knn_digraph(3, 3, 1, np.random.default_rng(0))


class TestSimulation:
    def test_deterministic_run_matches_oracle(self):
        instance = small_instance(rho=0.0)
        result, nodes = simulate(instance)
        assert result.outcome is SimulationOutcome.HALTED
        oracle = centralized_oracle(
            [c for s in instance.sets for c in s.nominal_constraints()], instance.objective, instance.space
        )
        for node in nodes:
            assert node.cost == pytest.approx(oracle.cost, abs=1e-6)
            assert node.candidate.coords[0] == oracle.point.coords[0]

    def test_costs_are_monotone(self):
        result, _ = simulate(small_instance(rho=0.05, seed=2))
        frame = trace_frame(result.traces)
        for _, group in frame[frame.event == "optimize"].groupby("node"):
            assert (group["cost"].diff().dropna() >= -1e-9).all()

    def test_transmissions_match_events(self):
        result, nodes = simulate(small_instance(rho=0.05, seed=3))
        for node in nodes:
            sent = [ev for ev in result.traces if ev.node == node.id and ev.event is EventKind.TRANSMIT]
            assert len(sent) == node.transmissions == result.stats.transmissions[node.id]

    def test_bit_identical_reruns(self):
        first, _ = simulate(small_instance(rho=0.05, seed=4), seed=11)
        second, _ = simulate(small_instance(rho=0.05, seed=4), seed=11)
        assert first.traces == second.traces

    def test_order_and_parallel_do_not_change_traces(self):
        base, _ = simulate(small_instance(rho=0.05, seed=5), seed=3)
        shuffled, _ = simulate(small_instance(rho=0.05, seed=5), seed=3, order="shuffled")
        parallel, _ = simulate(small_instance(rho=0.05, seed=5), seed=3, parallel=True, workers=3)
        assert base.traces == shuffled.traces == parallel.traces

    def test_staggered_mode_halts(self):
        result, _ = simulate(small_instance(rho=0.0, seed=6), staggered=True)
        assert result.halted

    def test_halt_events_once_per_node(self):
        result, nodes = simulate(small_instance(rho=0.0, seed=7))
        halts = [ev.node for ev in result.traces if ev.event is EventKind.HALT]
        assert sorted(halts) == [node.id for node in nodes]

    def test_disconnected_schedule_rejected(self):
        instance = small_instance(edges=set())
        with pytest.raises(ConnectivityError):
            simulate(instance)

    def test_forced_lossy_run_keeps_local_optima(self):
        instance = small_instance(rho=0.0, seed=8)
        lossy = dataclasses.replace(instance, schedule=EdgeSchedule.random_loss(4, ring(4), 1.0, L=2))
        result, nodes = simulate(lossy, force=True, max_rounds=30)
        assert all(ev.event is not EventKind.TRANSMIT or ev.t == 1 for ev in result.traces)
        for node in nodes:
            first = next(ev for ev in result.traces if ev.node == node.id)
            assert node.cost == first.cost

    def test_tied_objective_halts_at_lexicographic_point(self):
        # node 1 holds x1 >= 0, node 2 holds x2 >= 1; the objective ignores x2
        space = MixedIntegerSpace(0, 2)
        sets = (
            UncertainConstraintSet.interval_matrix(1, np.array([[-1.0, 0.0]]), np.array([0.0]), 0.0),
            UncertainConstraintSet.interval_matrix(2, np.array([[0.0, -1.0]]), np.array([-1.0]), 0.0),
        )
        instance = Instance(
            kind="milp", seed=0, space=space, objective=(1.0, 0.0), sets=sets,
            schedule=EdgeSchedule.static(2, {(1, 2), (2, 1)}),
            epsilons=(0.05,) * 2, deltas=(1e-3,) * 2,
        )
        result, nodes = simulate(instance)
        assert result.halted
        for node in nodes:
            assert node.candidate.coords == pytest.approx((0.0, 1.0))

    def test_no_frozen_halts_without_scenario_stop(self):
        result, _ = simulate(small_instance(rho=0.0, seed=9))
        assert result.halted
        assert result.stats.all_frozen_round is None
        assert not any(result.stats.halted_on_frozen.values())
