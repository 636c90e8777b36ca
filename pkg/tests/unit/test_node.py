"""
Unit tests for the per-node state machine.
"""

import numpy as np
import pytest

from randcons.errors import InfeasibleSubproblemError
from randcons.geometry import Basis, LinearConstraint, MixedIntegerSpace, Provenance
from randcons.node import (
    NodeMessage,
    check_halt,
    halt_threshold,
    node_init,
    node_optimization,
    node_verification,
    update_freeze,
)
from randcons.solver import solve_mip
from randcons.geometry import ConstraintSystem
from randcons.uncertainty import SampleSchedule, UncertainConstraintSet

LINE = MixedIntegerSpace(0, 1)


def lower_bound_set(owner, bound, radius=0.0):
    """x >= bound, with the coefficient of x perturbed by up to ``radius``."""
    return UncertainConstraintSet.interval_matrix(owner, np.array([[-1.0]]), np.array([-bound]), radius)


def make_node(uset, threshold=3, scenario_bound=None, r=1):
    return node_init(
        uset.owner,
        uset,
        [1.0],
        LINE,
        SampleSchedule(0.1, 0.01),
        halt_threshold=threshold,
        r=r,
        scenario_bound=scenario_bound,
    )


def message_from(owner, bound, cost):
    con = LinearConstraint.make([-1.0], -bound, Provenance(owner, "nominal"))
    return NodeMessage(owner, Basis((con,), cost))


class TestHaltThreshold:
    def test_values(self):
        assert halt_threshold(10, 1) == 21
        assert halt_threshold(10, 1, "2D+1", diameter=4) == 9
        with pytest.raises(ValueError):
            halt_threshold(10, 1, "2D+1")
        with pytest.raises(ValueError):
            halt_threshold(10, 1, "bogus")


class TestInit:
    def test_nominal_optimum(self):
        node = make_node(lower_bound_set(1, 2.0))
        assert node.k == 1
        assert node.candidate.coords == pytest.approx((2.0,))
        assert node.cost == pytest.approx(2.0)
        assert node.basis_size == 1

    def test_matches_centralized_solve(self):
        uset = UncertainConstraintSet.interval_matrix(
            1, np.array([[-1.0, -1.0], [1.0, -2.0], [-1.0, 0.0]]), np.array([-1.0, 4.0, 0.0]), 0.0
        )
        space = MixedIntegerSpace(1, 1)
        node = node_init(1, uset, [1.0, 2.0], space, SampleSchedule(0.1, 0.01), halt_threshold=3)
        direct = solve_mip(ConstraintSystem.build(space, [1.0, 2.0], uset.nominal_constraints()))
        assert node.candidate == direct.point

    def test_deterministic(self):
        a = make_node(lower_bound_set(1, 2.0, 0.1))
        b = make_node(lower_bound_set(1, 2.0, 0.1))
        assert a.candidate == b.candidate
        assert a.basis == b.basis

    def test_infeasible_nominal_problem(self):
        uset = UncertainConstraintSet.interval_matrix(1, np.array([[1.0], [-1.0]]), np.array([0.0, -1.0]), 0.0)
        with pytest.raises(InfeasibleSubproblemError):
            make_node(uset)


class TestVerification:
    def test_first_verification_samples(self):
        node = make_node(lower_bound_set(1, 2.0))
        assert node_verification(node, np.random.default_rng(0)) == []
        assert node.k == 2

    def test_unchanged_candidate_skips_sampling(self):
        node = make_node(lower_bound_set(1, 2.0))
        rng = np.random.default_rng(0)
        node_verification(node, rng)
        node_optimization(node, [])
        assert node_verification(node, rng) == []
        assert node.k == 2

    def test_violation_raises_cost(self):
        node = make_node(lower_bound_set(1, 1.0, radius=0.5))
        before = node.cost
        certs = node_verification(node, np.random.default_rng(3))
        assert certs
        node_optimization(node, [])
        assert node.cost > before
        for cert in certs:
            for con in cert.constraints:
                assert con.residual(node.candidate) <= 1e-9


class TestOptimization:
    def test_first_call_transmits_then_fixed_point(self):
        node = make_node(lower_bound_set(1, 2.0))
        node_verification(node, np.random.default_rng(0))
        msg = node_optimization(node, [])
        assert msg is not None and msg.sender == 1
        assert node.transmissions == 1
        assert node.unchanged == 1
        assert node_optimization(node, []) is None
        assert node.unchanged == 2

    def test_incoming_basis_raises_cost(self):
        node = make_node(lower_bound_set(1, 0.0))
        node_optimization(node, [])
        msg = node_optimization(node, [message_from(2, 3.0, 3.0)])
        assert node.cost == pytest.approx(3.0)
        assert node.unchanged == 0
        assert msg is not None
        assert node.transmissions == 2

    def test_lower_incoming_basis_keeps_cost(self):
        node = make_node(lower_bound_set(1, 2.0))
        node_optimization(node, [])
        assert node_optimization(node, [message_from(2, 1.0, 1.0)]) is None
        assert node.cost == pytest.approx(2.0)

    def test_incoming_order_does_not_matter(self):
        messages = [message_from(2, 3.0, 3.0), message_from(3, 1.0, 1.0), message_from(4, 3.0, 3.0)]
        a = make_node(lower_bound_set(1, 0.0))
        b = make_node(lower_bound_set(1, 0.0))
        node_optimization(a, messages)
        node_optimization(b, messages[::-1])
        assert a.basis == b.basis
        assert a.candidate == b.candidate

    def test_matching_resolve_holds_candidate_and_cost(self):
        node = make_node(lower_bound_set(1, 2.0))
        node_optimization(node, [])
        candidate, cost = node.candidate, node.cost
        node_optimization(node, [message_from(2, 1.0, 1.0)])
        assert node.candidate is candidate
        assert node.cost == cost

    def test_halt_after_threshold(self):
        node = make_node(lower_bound_set(1, 2.0), threshold=3)
        for _ in range(2):
            node_optimization(node, [])
            assert not check_halt(node)
        node_optimization(node, [])
        assert check_halt(node)
        node_optimization(node, [message_from(2, 5.0, 5.0)])
        assert not check_halt(node)

    def test_idle_rounds_not_counted_when_disabled(self):
        node = make_node(lower_bound_set(1, 2.0))
        node_optimization(node, [])
        node_optimization(node, [], count_idle=False)
        assert node.unchanged == 1


class TestFreeze:
    def test_not_frozen_below_bound(self):
        node = make_node(lower_bound_set(1, 2.0, 0.1), scenario_bound=10**9)
        node_verification(node, np.random.default_rng(0))
        update_freeze(node, [])
        assert not node.frozen

    def test_freezes_and_stops_counting(self):
        node = make_node(lower_bound_set(1, 1.0, 0.5), scenario_bound=5)
        rng = np.random.default_rng(0)
        node_verification(node, rng)
        update_freeze(node, [])
        assert node.frozen
        k = node.k
        for _ in range(5):
            node_optimization(node, [])
            node_verification(node, rng)
            update_freeze(node, [])
        assert node.k == k

    def test_all_frozen_flag_propagates(self):
        node = make_node(lower_bound_set(1, 2.0), scenario_bound=5)
        node_verification(node, np.random.default_rng(0))
        node_optimization(node, [])
        incoming = [NodeMessage(2, node.basis, frozen=True, all_frozen=True)]
        update_freeze(node, incoming)
        assert node.all_frozen_seen

    def test_persistent_frozen_neighbors(self):
        node = make_node(lower_bound_set(1, 2.0), threshold=2, scenario_bound=5)
        node_verification(node, np.random.default_rng(0))
        node_optimization(node, [])
        incoming = [NodeMessage(2, node.basis, frozen=True)]
        update_freeze(node, incoming)
        assert not node.all_frozen_seen
        update_freeze(node, incoming)
        assert node.all_frozen_seen
