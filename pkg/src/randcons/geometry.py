"""
Domain types for mixed-integer spaces, linear constraints and bases.

Everything here is an immutable value object: constraints and points are
backed by tuples so they can be hashed, compared and shared between nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math
from typing import Iterable, Sequence

import numpy as np

from .config import FEASIBILITY_TOL, INTEGRALITY_TOL, MAX_INTEGER_DIM
from .errors import DimensionMismatchError, HellyOverflowError

PROVENANCE_KINDS = ("nominal", "sample", "certificate", "user")


@dataclass(frozen=True)
class MixedIntegerSpace:
    """The domain Z^d_Z x R^d_R; integer coordinates come first."""

    d_Z: int
    d_R: int

    def __post_init__(self) -> None:
        if self.d_Z < 0 or self.d_R < 0:
            raise ValueError("space dimensions must be non-negative")
        if self.d_Z + self.d_R < 1:
            raise ValueError("space must have at least one coordinate")

    @property
    def d(self) -> int:
        return self.d_Z + self.d_R

    def is_continuous(self) -> bool:
        return self.d_Z == 0

    def relaxed(self) -> "MixedIntegerSpace":
        """Return the continuous space of the same dimension."""
        return MixedIntegerSpace(0, self.d)


def helly_number(space: MixedIntegerSpace) -> int:
    """Return (d_R + 1) * 2^d_Z."""
    if space.d_Z > MAX_INTEGER_DIM:
        raise HellyOverflowError(
            f"d_Z={space.d_Z} exceeds the supported maximum of {MAX_INTEGER_DIM}"
        )
    return (space.d_R + 1) * (1 << space.d_Z)


def combinatorial_dimension(space: MixedIntegerSpace) -> int:
    """Largest possible basis size, h(S) - 1."""
    return helly_number(space) - 1


@dataclass(frozen=True)
class Point:
    """A point of a mixed-integer space with exactly integral leading coordinates."""

    coords: tuple[float, ...]

    @classmethod
    def in_space(
        cls,
        coords: Iterable[float],
        space: MixedIntegerSpace,
        integrality_tol: float = INTEGRALITY_TOL,
    ) -> "Point":
        """Build a point, snapping the first d_Z coordinates to integers."""
        values = [float(v) for v in coords]
        if len(values) != space.d:
            raise DimensionMismatchError(
                f"point has {len(values)} coordinates, space has {space.d}"
            )
        for j in range(space.d_Z):
            nearest = round(values[j])
            if abs(values[j] - nearest) > integrality_tol:
                raise ValueError(
                    f"coordinate {j} = {values[j]!r} is not integral within {integrality_tol}"
                )
            values[j] = float(nearest)
        return cls(tuple(values))

    @property
    def dim(self) -> int:
        return len(self.coords)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=float)

    def matches(self, other: "Point", space: MixedIntegerSpace, tol: float) -> bool:
        """Integer parts equal exactly, continuous parts within ``tol``."""
        if self.dim != other.dim:
            return False
        for j, (u, v) in enumerate(zip(self.coords, other.coords)):
            if j < space.d_Z:
                if u != v:
                    return False
            elif abs(u - v) > tol:
                return False
        return True


@dataclass(frozen=True)
class Provenance:
    """Where a constraint came from: origin node, kind, sample id and row."""

    node: int
    kind: str
    sample: int | None = None
    row: int = 0

    def __post_init__(self) -> None:
        if self.kind not in PROVENANCE_KINDS:
            raise ValueError(f"unknown provenance kind: {self.kind}")

    def label(self) -> str:
        sample = "-" if self.sample is None else str(self.sample)
        return f"{self.node}:{self.kind}:{sample}:{self.row}"


@dataclass(frozen=True)
class LinearConstraint:
    """The half-space a . x <= b."""

    a: tuple[float, ...]
    b: float
    provenance: Provenance = field(default_factory=lambda: Provenance(0, "user"))

    def __post_init__(self) -> None:
        if not self.a:
            raise ValueError("constraint needs a non-empty coefficient vector")
        if all(v == 0.0 for v in self.a):
            raise ValueError("constraint coefficient vector must have a nonzero entry")
        if not math.isfinite(self.b) or not all(math.isfinite(v) for v in self.a):
            raise ValueError("constraint data must be finite")

    @classmethod
    def make(
        cls,
        a: Sequence[float] | np.ndarray,
        b: float,
        provenance: Provenance | None = None,
    ) -> "LinearConstraint":
        coeffs = tuple(float(v) for v in a)
        if provenance is None:
            return cls(coeffs, float(b))
        return cls(coeffs, float(b), provenance)

    @property
    def dim(self) -> int:
        return len(self.a)

    def residual(self, x: Point | Sequence[float] | np.ndarray) -> float:
        return residual(self, x)

    def is_satisfied(self, x: Point | Sequence[float] | np.ndarray, tol: float = FEASIBILITY_TOL) -> bool:
        return residual(self, x) <= tol


def _as_vector(x: Point | Sequence[float] | np.ndarray) -> np.ndarray:
    if isinstance(x, Point):
        return x.as_array()
    return np.asarray(x, dtype=float)


def residual(constraint: LinearConstraint, x: Point | Sequence[float] | np.ndarray) -> float:
    """Return a . x - b; the point satisfies the constraint iff this is <= tolerance."""
    vec = _as_vector(x)
    if vec.shape != (constraint.dim,):
        raise DimensionMismatchError(
            f"constraint has dimension {constraint.dim}, point has shape {vec.shape}"
        )
    return float(np.dot(constraint.a, vec) - constraint.b)


def cost(c: Sequence[float] | np.ndarray, x: Point | Sequence[float] | np.ndarray) -> float:
    """Objective value c . x."""
    cvec = np.asarray(c, dtype=float)
    vec = _as_vector(x)
    if cvec.shape != vec.shape:
        raise DimensionMismatchError(f"objective shape {cvec.shape} vs point shape {vec.shape}")
    return float(np.dot(cvec, vec))


@dataclass(frozen=True)
class ConstraintSystem:
    """A deterministic problem: minimize c . x over the constraints, x in the space."""

    space: MixedIntegerSpace
    objective: tuple[float, ...]
    constraints: tuple[LinearConstraint, ...] = ()

    def __post_init__(self) -> None:
        if len(self.objective) != self.space.d:
            raise DimensionMismatchError(
                f"objective has {len(self.objective)} entries, space has {self.space.d}"
            )
        for con in self.constraints:
            if con.dim != self.space.d:
                raise DimensionMismatchError(
                    f"constraint {con.provenance.label()} has dimension {con.dim}, "
                    f"space has {self.space.d}"
                )

    @classmethod
    def build(
        cls,
        space: MixedIntegerSpace,
        objective: Sequence[float] | np.ndarray,
        constraints: Iterable[LinearConstraint] = (),
    ) -> "ConstraintSystem":
        """Build a system, dropping exact duplicate constraints but keeping order."""
        unique = tuple(dict.fromkeys(constraints))
        return cls(space, tuple(float(v) for v in objective), unique)

    def __len__(self) -> int:
        return len(self.constraints)

    def matrix(self) -> tuple[np.ndarray, np.ndarray]:
        """Return (A, b) with one row per constraint."""
        if not self.constraints:
            return np.zeros((0, self.space.d)), np.zeros(0)
        A = np.array([con.a for con in self.constraints], dtype=float)
        b = np.array([con.b for con in self.constraints], dtype=float)
        return A, b

    def with_constraints(self, constraints: Iterable[LinearConstraint]) -> "ConstraintSystem":
        return ConstraintSystem.build(self.space, self.objective, constraints)

    def without(self, index: int) -> "ConstraintSystem":
        rest = self.constraints[:index] + self.constraints[index + 1:]
        return ConstraintSystem(self.space, self.objective, rest)

    def relaxed(self) -> "ConstraintSystem":
        return ConstraintSystem(self.space.relaxed(), self.objective, self.constraints)

    def is_feasible_point(self, x: Point | Sequence[float] | np.ndarray, tol: float = FEASIBILITY_TOL) -> bool:
        return all(residual(con, x) <= tol for con in self.constraints)


@dataclass(frozen=True)
class Basis:
    """A minimal collection of constraints defining the optimal cost of a problem."""

    constraints: tuple[LinearConstraint, ...]
    cost: float

    def __len__(self) -> int:
        return len(self.constraints)

    def __iter__(self):
        return iter(self.constraints)

    def same_constraints(self, other: "Basis | None") -> bool:
        if other is None:
            return False
        return set(self.constraints) == set(other.constraints)

    def labels(self) -> list[str]:
        return [con.provenance.label() for con in self.constraints]
