"""
Unit tests for the mixed-integer solver, including a brute-force oracle on
small pure-integer boxes.
"""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from randcons.config import SolverConfig
from randcons.geometry import ConstraintSystem, LinearConstraint, MixedIntegerSpace, Point
from randcons.solver import (
    SolveStatus,
    compute_basis,
    constraints_violated,
    lex_tie_break,
    solve_lp_relaxation,
    solve_mip,
)


def _system(space, c, rows):
    return ConstraintSystem.build(space, c, [LinearConstraint.make(a, b) for a, b in rows])


def _box_rows(d, half):
    rows = []
    for j in range(d):
        unit = [0.0] * d
        unit[j] = 1.0
        rows.append((unit, float(half)))
        rows.append(([-v for v in unit], float(half)))
    return rows


def brute_force(c, A, b, d, half=10):
    """Cost and lexicographically smallest minimizer over the integer box."""
    grid = np.array(list(itertools.product(range(-half, half + 1), repeat=d)), dtype=float)
    feasible = grid[np.all(grid @ A.T <= b + 1e-9, axis=1)] if len(A) else grid
    if len(feasible) == 0:
        return None, None
    values = feasible @ c
    best = values.min()
    tied = feasible[values <= best + 1e-9]
    return float(best), tuple(min(map(tuple, tied)))


def random_integer_problem(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 4))
    m = int(rng.integers(1, 8))
    A = rng.integers(-5, 6, size=(m, d)).astype(float)
    A[np.all(A == 0, axis=1), 0] = 1.0
    b = rng.integers(-5, 15, size=m).astype(float)
    c = rng.integers(-4, 5, size=d).astype(float)
    return d, A, b, c


class TestLinearPrograms:
    def test_simple_lp(self):
        space = MixedIntegerSpace(0, 2)
        result = solve_mip(_system(space, [1.0, 1.0], [([-1.0, 0.0], -1.0), ([0.0, -1.0], -2.0)]))
        assert result.status is SolveStatus.OPTIMAL
        assert result.point.coords == pytest.approx((1.0, 2.0))
        assert result.cost == pytest.approx(3.0)

    def test_infeasible(self):
        space = MixedIntegerSpace(0, 1)
        result = solve_mip(_system(space, [1.0], [([1.0], 0.0), ([-1.0], -1.0)]))
        assert result.status is SolveStatus.INFEASIBLE
        assert result.point is None

    def test_unbounded_without_box(self):
        space = MixedIntegerSpace(0, 1)
        result = solve_mip(_system(space, [1.0], []), SolverConfig(bounding_box=None))
        assert result.status is SolveStatus.UNBOUNDED

    def test_bounding_box_makes_problem_bounded(self):
        space = MixedIntegerSpace(0, 1)
        result = solve_mip(_system(space, [1.0], []))
        assert result.is_optimal
        assert result.box_active
        assert result.point.coords == pytest.approx((-1e6,))

    def test_lexicographic_tie_break(self):
        space = MixedIntegerSpace(0, 2)
        rows = [([-1.0, -1.0], -1.0), ([-1.0, 0.0], 0.0), ([0.0, -1.0], 0.0)]
        result = solve_mip(_system(space, [1.0, 1.0], rows))
        assert result.point.coords == pytest.approx((0.0, 1.0))

    def test_lex_tie_break_helper(self):
        points = [Point((1.0, 0.0)), Point((0.0, 2.0)), Point((0.0, 1.0))]
        assert lex_tie_break(points, [1.0, 1.0, 1.0]) == Point((0.0, 1.0))
        assert lex_tie_break(points, [0.0, 1.0, 1.0]) == Point((1.0, 0.0))
        with pytest.raises(ValueError):
            lex_tie_break([], [])


class TestMixedInteger:
    def test_integer_rounding_down(self):
        space = MixedIntegerSpace(1, 0)
        result = solve_mip(_system(space, [-1.0], [([1.0], 2.5)]))
        assert result.point.coords == (2.0,)
        assert result.cost == -2.0

    def test_relaxation(self):
        space = MixedIntegerSpace(1, 0)
        result = solve_lp_relaxation(_system(space, [-1.0], [([1.0], 2.5)]))
        assert result.cost == pytest.approx(-2.5)

    def test_integer_gap_infeasible(self):
        space = MixedIntegerSpace(1, 0)
        result = solve_mip(_system(space, [1.0], [([2.0], 1.0), ([-2.0], -0.5)]))
        assert result.status is SolveStatus.INFEASIBLE

    def test_mixed_problem(self):
        # min -z - y  s.t. z + 2y <= 3.5, y <= 1, z >= 0, y >= 0, z integer
        space = MixedIntegerSpace(1, 1)
        rows = [([1.0, 2.0], 3.5), ([0.0, 1.0], 1.0), ([-1.0, 0.0], 0.0), ([0.0, -1.0], 0.0)]
        result = solve_mip(_system(space, [-1.0, -1.0], rows))
        assert result.cost == pytest.approx(-3.25)
        assert result.point.coords == pytest.approx((3.0, 0.25))

    @pytest.mark.parametrize("seed", range(60))
    def test_matches_brute_force(self, seed):
        self._check_against_brute_force(seed)

    @pytest.mark.slow
    @pytest.mark.parametrize("seed", range(60, 500))
    def test_matches_brute_force_wide(self, seed):
        self._check_against_brute_force(seed)

    def _check_against_brute_force(self, seed):
        d, A, b, c = random_integer_problem(seed)
        space = MixedIntegerSpace(d, 0)
        rows = [(A[k], b[k]) for k in range(len(b))] + _box_rows(d, 10)
        result = solve_mip(_system(space, c, rows))
        expected_cost, expected_point = brute_force(c, A, b, d)
        if expected_cost is None:
            assert result.status is SolveStatus.INFEASIBLE
            return
        assert result.status is SolveStatus.OPTIMAL
        assert result.cost == pytest.approx(expected_cost, abs=1e-7)
        assert result.point.coords == expected_point
        assert not constraints_violated(_system(space, c, rows).constraints, result.point, 1e-9)
        again = solve_mip(ConstraintSystem.build(space, c, result.basis))
        assert again.status is SolveStatus.OPTIMAL
        assert again.point.coords == expected_point


class TestBasis:
    def test_basis_reproduces_cost(self):
        space = MixedIntegerSpace(0, 2)
        rows = [([-1.0, 0.0], -1.0), ([0.0, -1.0], -2.0), ([1.0, 1.0], 10.0), ([-1.0, -1.0], 0.0)]
        system = _system(space, [1.0, 1.0], rows)
        result = solve_mip(system)
        basis = compute_basis(system, result)
        assert basis.cost == pytest.approx(3.0)
        assert len(basis) <= 2
        reduced = solve_mip(ConstraintSystem.build(space, [1.0, 1.0], basis))
        assert reduced.cost == pytest.approx(result.cost)

    def test_every_basis_constraint_matters(self):
        space = MixedIntegerSpace(1, 1)
        rows = [([1.0, 2.0], 3.5), ([0.0, 1.0], 1.0), ([-1.0, 0.0], 0.0), ([0.0, -1.0], 0.0)]
        system = _system(space, [-1.0, -1.0], rows)
        result = solve_mip(system)
        basis = result.basis
        assert len(basis) <= 3
        for k in range(len(basis)):
            rest = basis.constraints[:k] + basis.constraints[k + 1:]
            smaller = solve_mip(ConstraintSystem.build(space, system.objective, rest))
            assert not smaller.point.matches(result.point, space, 1e-7)

    def test_basis_needs_optimal_result(self):
        space = MixedIntegerSpace(0, 1)
        system = _system(space, [1.0], [([1.0], 0.0), ([-1.0], -1.0)])
        with pytest.raises(ValueError):
            compute_basis(system, solve_mip(system))

    @pytest.mark.parametrize("space", [MixedIntegerSpace(0, 2), MixedIntegerSpace(1, 1)])
    def test_basis_keeps_tie_breaking_constraint(self, space):
        # x1 >= 0 alone fixes the cost; x2 >= 1 only fixes the tie-break
        system = _system(space, [1.0, 0.0], [([-1.0, 0.0], 0.0), ([0.0, -1.0], -1.0)])
        result = solve_mip(system)
        assert result.point.coords == pytest.approx((0.0, 1.0))
        assert len(result.basis) == 2
        again = solve_mip(ConstraintSystem.build(space, system.objective, result.basis))
        assert again.point.coords == pytest.approx((0.0, 1.0))

    def test_basis_of_nearly_flat_edge(self):
        # min x2 over x2 >= -1e-10 x1, x1 <= 10: the refined point drifts along
        # the flat edge away from the cost-optimal vertex
        space = MixedIntegerSpace(0, 2)
        system = _system(space, [0.0, 1.0], [([-1e-10, -1.0], 0.0), ([1.0, 0.0], 10.0)])
        result = solve_mip(system)
        assert result.is_optimal
        again = solve_mip(ConstraintSystem.build(space, system.objective, result.basis))
        assert again.point.matches(result.point, space, 1e-7)

    def test_boxed_integer_basis_terminates(self):
        space = MixedIntegerSpace(2, 1)
        rows = [([3.0, -2.0, 1.0], 7.5), ([-1.0, 4.0, 0.0], 9.0), ([2.0, 2.0, -1.0], 4.0)] + _box_rows(3, 10)
        system = _system(space, [-1.0, -2.0, 0.5], rows)
        result = solve_mip(system, SolverConfig(basis_node_limit=5))
        assert result.status is SolveStatus.OPTIMAL
        again = solve_mip(ConstraintSystem.build(space, system.objective, result.basis))
        assert again.point.matches(result.point, space, 1e-7)

    def test_node_limit_is_reported_not_raised(self):
        space = MixedIntegerSpace(2, 0)
        rows = [([2.0, 2.0], 3.0), ([-2.0, 2.0], 1.0)]
        result = solve_mip(_system(space, [-1.0, -1.0], rows), SolverConfig(node_limit=1))
        assert result.status is SolveStatus.NODE_LIMIT
        assert result.point is None


@settings(max_examples=30, deadline=None)
@given(
    st.lists(
        st.tuples(st.integers(-4, 4), st.integers(-4, 4), st.integers(0, 12)),
        min_size=1,
        max_size=5,
    ),
    st.tuples(st.integers(-4, 4), st.integers(-4, 4), st.integers(0, 12)),
)
def test_adding_a_constraint_never_lowers_cost(rows, extra):
    space = MixedIntegerSpace(1, 1)
    base_rows = [([float(a), float(b)], float(r)) for a, b, r in rows if (a, b) != (0, 0)]
    base_rows += _box_rows(2, 20)
    system = _system(space, [1.0, -1.0], base_rows)
    before = solve_mip(system)
    if extra[:2] == (0, 0):
        return
    after = solve_mip(_system(space, [1.0, -1.0], base_rows + [([float(extra[0]), float(extra[1])], float(extra[2]))]))
    assert before.is_optimal
    if after.is_optimal:
        assert after.cost >= before.cost - 1e-9
    else:
        assert after.status is SolveStatus.INFEASIBLE
