"""
Deterministic mixed-integer linear solver.

The LP engine is a dense two-phase tableau simplex (Dantzig pricing, switching
to Bland's rule after a run of degenerate pivots). Mixed-integer problems are
solved by depth-first branch-and-bound on the most fractional variable, floor
branch first. Uniqueness of the returned minimizer comes from sequential
objective refinement: minimize c . x, then x_1 at that cost, then x_2, ...
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
import logging
import math
from typing import Sequence

import numpy as np

from .config import POINT_MATCH_TOL, SolverConfig
from .errors import NodeLimitError, NumericalFailureError
from .geometry import (
    Basis,
    ConstraintSystem,
    LinearConstraint,
    Point,
    combinatorial_dimension,
    cost as objective_value,
    residual,
)

logger = logging.getLogger(__name__)

PIVOT_TOL = 1e-9
REDUCED_COST_TOL = 1e-10
BLAND_SWITCH = 12
LEX_MATCH_TOL = 0.5 * POINT_MATCH_TOL


class SolveStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NODE_LIMIT = "node-limit"


@dataclass(frozen=True)
class SolveResult:
    """Outcome of one solve; point and basis are present iff the status is optimal."""

    status: SolveStatus
    point: Point | None = None
    cost: float = math.inf
    basis: Basis | None = None
    bb_nodes: int = 0
    box_active: bool = False

    @property
    def is_optimal(self) -> bool:
        return self.status is SolveStatus.OPTIMAL


@dataclass
class _Outcome:
    status: SolveStatus
    x: np.ndarray | None = None
    value: float = math.inf
    nodes: int = 0


# ============================================================================
# SIMPLEX
# ============================================================================

class _Tableau:
    """Dense simplex tableau over standard form M z = h, z >= 0, h >= 0."""

    def __init__(self, M: np.ndarray, h: np.ndarray, basis: list[int], iteration_cap: int) -> None:
        self.T = np.hstack([M, h[:, None]]).astype(float)
        self.basis = list(basis)
        self.iteration_cap = iteration_cap
        self.iterations = 0

    @property
    def ncols(self) -> int:
        return self.T.shape[1] - 1

    def pivot(self, row: int, col: int) -> None:
        T = self.T
        T[row] /= T[row, col]
        factors = T[:, col].copy()
        factors[row] = 0.0
        T -= np.outer(factors, T[row])
        T[:, col] = 0.0
        T[row, col] = 1.0
        rhs = T[:, -1]
        rhs[(rhs < 0.0) & (rhs > -1e-11)] = 0.0
        self.basis[row] = col

    def run(self, cost: np.ndarray) -> SolveStatus:
        """Minimize cost . z from the current basis."""
        T = self.T
        n = self.ncols
        reduced = cost - cost[self.basis] @ T[:, :n]
        degenerate_streak = 0
        use_bland = False
        while True:
            candidates = np.flatnonzero(reduced < -REDUCED_COST_TOL)
            if candidates.size == 0:
                return SolveStatus.OPTIMAL
            if use_bland:
                col = int(candidates[0])
            else:
                col = int(candidates[np.argmin(reduced[candidates])])
            column = T[:, col]
            rows = np.flatnonzero(column > PIVOT_TOL)
            if rows.size == 0:
                return SolveStatus.UNBOUNDED
            ratios = T[rows, -1] / column[rows]
            best = ratios.min()
            ties = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
            row = int(min(ties, key=lambda i: self.basis[i]))
            if best <= 1e-12:
                degenerate_streak += 1
                if degenerate_streak > BLAND_SWITCH:
                    use_bland = True
            else:
                degenerate_streak = 0
            self.pivot(row, col)
            reduced = reduced - reduced[col] * T[row, :n]
            reduced[col] = 0.0
            self.iterations += 1
            if self.iterations > self.iteration_cap:
                raise NumericalFailureError(
                    f"simplex exceeded {self.iteration_cap} iterations"
                )

    def delete_rows(self, rows: list[int]) -> None:
        keep = [i for i in range(self.T.shape[0]) if i not in set(rows)]
        self.T = self.T[keep]
        self.basis = [self.basis[i] for i in keep]

    def drop_columns_from(self, first: int) -> None:
        self.T = np.hstack([self.T[:, :first], self.T[:, -1:]])


def _standard_form_solve(
    M: np.ndarray, h: np.ndarray, cost: np.ndarray, config: SolverConfig
) -> tuple[SolveStatus, np.ndarray | None]:
    """Minimize cost . z over M z <= h, z >= 0 (slacks added here)."""
    m, n = M.shape
    full = np.hstack([M, np.eye(m)])
    rhs = h.astype(float).copy()
    negative = np.flatnonzero(rhs < 0)
    full[negative] *= -1.0
    rhs[negative] *= -1.0
    n_std = n + m
    if negative.size:
        art = np.zeros((m, negative.size))
        art[negative, np.arange(negative.size)] = 1.0
        full_art = np.hstack([full, art])
    else:
        full_art = full
    basis = [n + i for i in range(m)]
    for k, i in enumerate(negative):
        basis[i] = n_std + k
    tab = _Tableau(full_art, rhs, basis, config.iteration_cap)
    kept_rows = list(range(m))

    if negative.size:
        phase_one = np.zeros(full_art.shape[1])
        phase_one[n_std:] = 1.0
        tab.run(phase_one)
        infeasibility = float(sum(tab.T[i, -1] for i, j in enumerate(tab.basis) if j >= n_std))
        scale = max(1.0, float(np.abs(h[negative]).max()))
        if infeasibility > config.feasibility_tol * scale:
            return SolveStatus.INFEASIBLE, None
        redundant: list[int] = []
        for i, j in enumerate(list(tab.basis)):
            if j < n_std:
                continue
            nonzero = np.flatnonzero(np.abs(tab.T[i, :n_std]) > PIVOT_TOL)
            if nonzero.size:
                tab.pivot(i, int(nonzero[0]))
            else:
                redundant.append(i)
        if redundant:
            tab.delete_rows(redundant)
            kept_rows = [i for i in kept_rows if i not in set(redundant)]
        tab.drop_columns_from(n_std)

    phase_two = np.concatenate([cost, np.zeros(m)])
    status = tab.run(phase_two)
    if status is not SolveStatus.OPTIMAL:
        return status, None

    z = np.zeros(n_std)
    z[tab.basis] = tab.T[:, -1]
    # Recompute basic values from the original data to shed accumulated pivot error.
    if kept_rows:
        try:
            B = full[kept_rows][:, tab.basis]
            polished = np.linalg.solve(B, rhs[kept_rows])
            if np.all(polished >= -1e-9):
                z = np.zeros(n_std)
                z[tab.basis] = np.maximum(polished, 0.0)
        except np.linalg.LinAlgError:
            pass
    return SolveStatus.OPTIMAL, z[:n]


def _solve_lp(
    c: np.ndarray,
    A: np.ndarray,
    b: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
    config: SolverConfig,
) -> _Outcome:
    """Minimize c . x over A x <= b, lo <= x <= hi (bounds may be infinite)."""
    d = c.size
    if np.any(lo > hi + config.feasibility_tol):
        return _Outcome(SolveStatus.INFEASIBLE, nodes=1)
    fixed = np.isfinite(lo) & np.isfinite(hi) & (lo >= hi)
    free = np.flatnonzero(~fixed)
    x = np.zeros(d)
    x[fixed] = lo[fixed]
    b_eff = b - A[:, fixed] @ x[fixed] if A.size else b.copy()
    A_free = A[:, free] if A.size else np.zeros((0, free.size))

    zero_rows = np.all(A_free == 0.0, axis=1) if A_free.size else np.ones(A.shape[0], dtype=bool)
    if free.size == 0:
        zero_rows = np.ones(A.shape[0], dtype=bool)
    if np.any(b_eff[zero_rows] < -config.feasibility_tol * np.maximum(1.0, np.abs(b[zero_rows]))):
        return _Outcome(SolveStatus.INFEASIBLE, nodes=1)
    if free.size == 0:
        return _Outcome(SolveStatus.OPTIMAL, x, float(c @ x), nodes=1)

    rows = [A_free[~zero_rows]]
    rhs = [b_eff[~zero_rows]]
    k = free.size
    eye = np.eye(k)
    upper = np.isfinite(hi[free])
    lower = np.isfinite(lo[free])
    if upper.any():
        rows.append(eye[upper])
        rhs.append(hi[free][upper])
    if lower.any():
        rows.append(-eye[lower])
        rhs.append(-lo[free][lower])
    G = np.vstack(rows)
    g = np.concatenate(rhs)

    M = np.hstack([G, -G])
    c_free = c[free]
    status, z = _standard_form_solve(M, g, np.concatenate([c_free, -c_free]), config)
    if status is not SolveStatus.OPTIMAL:
        return _Outcome(status, value=-math.inf if status is SolveStatus.UNBOUNDED else math.inf, nodes=1)
    x[free] = z[:k] - z[k:]
    return _Outcome(SolveStatus.OPTIMAL, x, float(c @ x), nodes=1)


# ============================================================================
# BRANCH AND BOUND
# ============================================================================

def _gap(value: float, config: SolverConfig) -> float:
    if not math.isfinite(value):
        return 0.0
    return config.optimality_tol * max(1.0, abs(value))


def _branch_and_bound(
    c: np.ndarray,
    A: np.ndarray,
    b: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
    n_int: int,
    config: SolverConfig,
    cutoff: float = math.inf,
) -> _Outcome:
    """
    Depth-first branch-and-bound. Only points strictly better than ``cutoff``
    are returned; INFEASIBLE means no such point exists.
    """
    best: _Outcome | None = None
    best_value = cutoff
    stack = [(lo.copy(), hi.copy())]
    nodes = 0
    while stack:
        node_lo, node_hi = stack.pop()
        nodes += 1
        if nodes > config.node_limit:
            raise NodeLimitError(f"branch-and-bound exceeded {config.node_limit} nodes")
        lp = _solve_lp(c, A, b, node_lo, node_hi, config)
        if lp.status is SolveStatus.INFEASIBLE:
            continue
        if lp.status is SolveStatus.UNBOUNDED:
            return _Outcome(SolveStatus.UNBOUNDED, value=-math.inf, nodes=nodes)
        if lp.value >= best_value - _gap(best_value, config):
            continue
        assert lp.x is not None
        xi = lp.x[:n_int]
        frac = np.abs(xi - np.round(xi))
        if n_int == 0:
            best, best_value = lp, lp.value
            continue
        if frac.max() <= config.integrality_tol:
            leaf_lo, leaf_hi = node_lo.copy(), node_hi.copy()
            leaf_lo[:n_int] = np.round(xi)
            leaf_hi[:n_int] = np.round(xi)
            leaf = _solve_lp(c, A, b, leaf_lo, leaf_hi, config)
            if leaf.status is SolveStatus.OPTIMAL:
                if leaf.value < best_value - _gap(best_value, config):
                    best, best_value = leaf, leaf.value
                continue
            if frac.max() == 0.0:
                continue
            j = int(np.argmax(frac))
        else:
            part = xi - np.floor(xi)
            distance = np.where(frac > config.integrality_tol, np.abs(part - 0.5), np.inf)
            j = int(np.argmin(distance))
        value = lp.x[j]
        down_hi = node_hi.copy()
        down_hi[j] = math.floor(value)
        up_lo = node_lo.copy()
        up_lo[j] = math.ceil(value) if math.ceil(value) != math.floor(value) else value + 1.0
        stack.append((up_lo, node_hi.copy()))
        stack.append((node_lo.copy(), down_hi))
    if best is None:
        return _Outcome(SolveStatus.INFEASIBLE, nodes=nodes)
    best.nodes = nodes
    return best


def _bounds(d: int, config: SolverConfig) -> tuple[np.ndarray, np.ndarray]:
    half = config.bounding_box if config.bounding_box is not None else math.inf
    return np.full(d, -half), np.full(d, half)


def _all_integers_fixed(lo: np.ndarray, hi: np.ndarray, n_int: int) -> bool:
    return bool(np.all(lo[:n_int] == hi[:n_int]))


def _minimize(
    c: np.ndarray,
    A: np.ndarray,
    b: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
    n_int: int,
    config: SolverConfig,
    cutoff: float = math.inf,
) -> _Outcome:
    if n_int == 0 or _all_integers_fixed(lo, hi, n_int):
        out = _solve_lp(c, A, b, lo, hi, config)
        if out.status is SolveStatus.OPTIMAL and out.value >= cutoff - _gap(cutoff, config):
            return _Outcome(SolveStatus.INFEASIBLE, nodes=out.nodes)
        return out
    return _branch_and_bound(c, A, b, lo, hi, n_int, config, cutoff)


def _optimal_value(system: ConstraintSystem, config: SolverConfig, cutoff: float = math.inf) -> _Outcome:
    """Optimal cost only, no tie-break refinement."""
    A, b = system.matrix()
    lo, hi = _bounds(system.space.d, config)
    c = np.asarray(system.objective, dtype=float)
    return _minimize(c, A, b, lo, hi, system.space.d_Z, config, cutoff)


# ============================================================================
# PUBLIC API
# ============================================================================

def lex_tie_break(
    candidates: Sequence[Point],
    costs: Sequence[float],
    tol: float = 0.0,
) -> Point:
    """Among the minimum-cost candidates return the lexicographically smallest."""
    if not candidates:
        raise ValueError("lex_tie_break needs at least one candidate")
    if len(candidates) != len(costs):
        raise ValueError("candidates and costs differ in length")
    best_cost = min(costs)
    tied = [p for p, value in zip(candidates, costs) if value <= best_cost + tol]
    return min(tied, key=lambda p: p.coords)


def _refine_lexicographically(
    system: ConstraintSystem,
    x: np.ndarray,
    optimum: float,
    config: SolverConfig,
) -> tuple[np.ndarray, int]:
    """Among points of cost ``optimum`` move to the lexicographically smallest one."""
    space = system.space
    d = space.d
    A, b = system.matrix()
    c = np.asarray(system.objective, dtype=float)
    lo, hi = _bounds(d, config)
    rows = [A, c[None, :]]
    rhs = [b, np.array([optimum + _gap(optimum, config)])]
    point = x.copy()
    nodes = 0
    for j in range(d):
        A_ext = np.vstack(rows)
        b_ext = np.concatenate(rhs)
        unit = np.zeros(d)
        unit[j] = 1.0
        if j < space.d_Z:
            out = _minimize(unit, A_ext, b_ext, lo, hi, space.d_Z, config, cutoff=point[j] - 0.5)
        else:
            out = _minimize(unit, A_ext, b_ext, lo, hi, space.d_Z, config,
                            cutoff=point[j] - _gap(point[j], config))
        nodes += out.nodes
        if out.status is SolveStatus.OPTIMAL and out.x is not None:
            point = out.x.copy()
        if j < space.d_Z:
            point[j] = round(point[j])
            lo[j] = hi[j] = point[j]
        else:
            rows.append(unit[None, :])
            rhs.append(np.array([point[j] + _gap(point[j], config)]))
    return point, nodes


def _box_active(x: np.ndarray, config: SolverConfig) -> bool:
    if config.bounding_box is None:
        return False
    return bool(np.any(np.abs(x) >= config.bounding_box * (1.0 - 1e-9)))


def _solve(system: ConstraintSystem, config: SolverConfig, with_basis: bool) -> SolveResult:
    try:
        out = _optimal_value(system, config)
        if out.status is not SolveStatus.OPTIMAL:
            value = -math.inf if out.status is SolveStatus.UNBOUNDED else math.inf
            return SolveResult(out.status, cost=value, bb_nodes=out.nodes)
        assert out.x is not None
        x, extra = _refine_lexicographically(system, out.x, out.value, config)
    except NodeLimitError:
        logger.warning("node limit of %d reached on a %d-constraint system",
                       config.node_limit, len(system))
        return SolveResult(SolveStatus.NODE_LIMIT, bb_nodes=config.node_limit)
    point = Point.in_space(x, system.space, config.integrality_tol)
    box = _box_active(point.as_array(), config)
    if box:
        logger.warning("bounding box |x| <= %g is active at the optimum", config.bounding_box)
    for con in system.constraints:
        if residual(con, point) > config.feasibility_tol * max(1.0, abs(con.b)):
            logger.warning("constraint %s violated by %.3e at the returned point",
                           con.provenance.label(), residual(con, point))
    result = SolveResult(
        SolveStatus.OPTIMAL,
        point=point,
        cost=objective_value(system.objective, point),
        bb_nodes=out.nodes + extra,
        box_active=box,
    )
    if not with_basis:
        return result
    try:
        basis = compute_basis(system, result, config)
    except NodeLimitError:
        logger.warning("node limit of %d reached while checking the basis", config.node_limit)
        return SolveResult(SolveStatus.NODE_LIMIT, bb_nodes=config.node_limit)
    return SolveResult(
        result.status, result.point, result.cost, basis, result.bb_nodes, result.box_active
    )


def solve_mip(system: ConstraintSystem, config: SolverConfig | None = None) -> SolveResult:
    """
    Solve a deterministic mixed-integer linear program.

    Returns the lexicographically smallest minimizer, its cost and a basis.
    Every problem is implicitly boxed by ``config.bounding_box``.
    """
    return _solve(system, config or SolverConfig(), with_basis=True)


def solve_lp_relaxation(system: ConstraintSystem, config: SolverConfig | None = None) -> SolveResult:
    """Solve the continuous relaxation with the same tie-break."""
    return _solve(system.relaxed(), config or SolverConfig(), with_basis=True)


def _cuts_cost_region(
    A: np.ndarray,
    b: np.ndarray,
    c: np.ndarray,
    con: LinearConstraint,
    optimum: float,
    config: SolverConfig,
) -> bool:
    """
    Whether ``con`` cuts into {y : A y <= b, c . y <= optimum + gap} inside the box.

    Tested on the continuous relaxation, so False means no point of the
    reduced problem that could beat the optimum is excluded by ``con``.
    """
    lo, hi = _bounds(len(c), config)
    A_ext = np.vstack([A, c[None, :]])
    b_ext = np.append(b, optimum + _gap(optimum, config))
    out = _solve_lp(-np.asarray(con.a, dtype=float), A_ext, b_ext, lo, hi, config)
    if out.status is not SolveStatus.OPTIMAL:
        return True
    return -out.value > con.b + config.feasibility_tol * max(1.0, abs(con.b))


def _lex_improves(system: ConstraintSystem, x: np.ndarray, optimum: float, config: SolverConfig) -> bool:
    """
    Whether ``system`` has a point before ``x`` in the order (c . y, y_1, ..., y_d).

    Mirrors the refinement in ``_refine_lexicographically``: integer
    coordinates must improve by a whole unit, continuous ones by more than
    half the point-matching tolerance.
    """
    space = system.space
    d = space.d
    A, b = system.matrix()
    c = np.asarray(system.objective, dtype=float)
    lo, hi = _bounds(d, config)
    first = _minimize(c, A, b, lo, hi, space.d_Z, config, cutoff=optimum - _gap(optimum, config))
    if first.status is not SolveStatus.INFEASIBLE:
        return True
    rows = [A, c[None, :]]
    rhs = [b, np.array([optimum + _gap(optimum, config)])]
    for j in range(d):
        unit = np.zeros(d)
        unit[j] = 1.0
        cutoff = x[j] - 0.5 if j < space.d_Z else x[j] - LEX_MATCH_TOL
        out = _minimize(unit, np.vstack(rows), np.concatenate(rhs), lo, hi, space.d_Z, config, cutoff)
        if out.status is not SolveStatus.INFEASIBLE:
            return True
        if j < space.d_Z:
            lo[j] = hi[j] = round(x[j])
        else:
            rows.append(unit[None, :])
            rhs.append(np.array([x[j] + _gap(x[j], config)]))
    return False


def _droppable(
    system: ConstraintSystem,
    trial: Sequence[LinearConstraint],
    con: LinearConstraint,
    x: np.ndarray,
    optimum: float,
    config: SolverConfig,
) -> bool:
    reduced = ConstraintSystem(system.space, system.objective, tuple(trial))
    A, b = reduced.matrix()
    c = np.asarray(system.objective, dtype=float)
    try:
        if not _cuts_cost_region(A, b, c, con, optimum, config):
            return True
        return not _lex_improves(reduced, x, optimum, config)
    except (NodeLimitError, NumericalFailureError) as exc:
        logger.debug("keeping %s, sub-solve gave up: %s", con.provenance.label(), exc)
        return False


def _reproduces(system: ConstraintSystem, kept: Sequence[LinearConstraint], point: Point,
                config: SolverConfig) -> bool:
    check = _solve(ConstraintSystem(system.space, system.objective, tuple(kept)), config, with_basis=False)
    return check.is_optimal and check.point is not None and check.point.matches(
        point, system.space, POINT_MATCH_TOL
    )


def compute_basis(
    system: ConstraintSystem,
    result: SolveResult,
    config: SolverConfig | None = None,
) -> Basis:
    """
    Extract a basis by dropping one constraint at a time.

    A constraint is discarded when the problem without it (and without the
    constraints already discarded) has no point ahead of the returned one in
    the order (cost, x_1, ..., x_d), so re-solving the basis alone gives the
    same point. Sub-solves run under ``config.basis_node_limit``; a
    constraint whose test hits that limit is kept. If the survivors still do
    not reproduce the point, the whole constraint set is returned.
    """
    config = config or SolverConfig()
    if not result.is_optimal or result.point is None:
        raise ValueError("compute_basis needs an optimal result")
    sub = replace(config, node_limit=min(config.node_limit, config.basis_node_limit))
    optimum = result.cost
    x = result.point.as_array()
    candidates = list(dict.fromkeys(system.constraints))
    kept = list(candidates)
    for con in candidates:
        trial = [k for k in kept if k != con]
        if _droppable(system, trial, con, x, optimum, sub):
            kept = trial
    if len(kept) < len(candidates) and not _reproduces(system, kept, result.point, config):
        logger.warning(
            "basis of %d constraints does not reproduce the optimum, keeping all %d",
            len(kept), len(candidates),
        )
        kept = candidates
    if len(kept) > combinatorial_dimension(system.space):
        logger.warning(
            "basis of size %d exceeds combinatorial dimension %d (degenerate problem)",
            len(kept), combinatorial_dimension(system.space),
        )
    return Basis(tuple(kept), optimum)


def constraints_violated(
    constraints: Sequence[LinearConstraint], x: Point, tol: float
) -> list[LinearConstraint]:
    return [con for con in constraints if residual(con, x) > tol]
