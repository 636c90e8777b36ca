"""
Uncertain constraint sets, their samplers and the sample-size bounds.

A node's uncertain set yields a list of linear constraints for every draw of
the uncertainty. Two families are supported: interval matrices (additive
uniform perturbation of every coefficient) and ball centers (rows anchored at
a point that is uniform in an l2-ball around its nominal position).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
import logging
import math
from typing import Iterator, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from .config import (
    ALAMO_FACTOR,
    FEASIBILITY_TOL,
    SCHEDULE_ALPHA,
    SCHEDULE_LOG_XI,
    THRESHOLD_DELTA_WEIGHT,
    THRESHOLD_HELLY_WEIGHT,
)
from .errors import DimensionMismatchError
from .geometry import LinearConstraint, Point, Provenance

logger = logging.getLogger(__name__)


class UncertaintyKind(str, Enum):
    INTERVAL_MATRIX = "interval-matrix"
    BALL_CENTER = "ball-center"


@dataclass(frozen=True)
class UncertainConstraintSet:
    """
    The constraint family F^i(q) owned by one node.

    ``rows`` and ``offsets`` hold the nominal data. For an interval matrix the
    realized constraints are (rows + D) x <= offsets with every entry of D
    uniform in [-radius, radius]. For a ball center they are
    rows x <= offsets + rows p with p uniform in the ball(center, radius).
    ``fixed_rows`` are certain constraints appended to every realization.
    """

    kind: UncertaintyKind
    owner: int
    rows: tuple[tuple[float, ...], ...]
    offsets: tuple[float, ...]
    radius: float
    dim: int
    center: tuple[float, ...] | None = None
    fixed_rows: tuple[tuple[float, ...], ...] = ()
    fixed_offsets: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.radius < 0:
            raise ValueError("uncertainty radius must be non-negative")
        if len(self.rows) != len(self.offsets) or len(self.fixed_rows) != len(self.fixed_offsets):
            raise DimensionMismatchError("rows and offsets differ in length")
        for row in self.rows + self.fixed_rows:
            if len(row) != self.dim:
                raise DimensionMismatchError(f"row of length {len(row)} in a {self.dim}-d set")
        if self.kind is UncertaintyKind.BALL_CENTER:
            if self.center is None:
                raise ValueError("ball-center uncertainty needs a nominal center")
            if len(self.center) != self.dim:
                raise DimensionMismatchError("center dimension differs from the set dimension")

    @classmethod
    def interval_matrix(
        cls, owner: int, nominal: np.ndarray, bounds: np.ndarray, radius: float
    ) -> "UncertainConstraintSet":
        nominal = np.atleast_2d(np.asarray(nominal, dtype=float))
        return cls(
            UncertaintyKind.INTERVAL_MATRIX,
            owner,
            tuple(tuple(row) for row in nominal.tolist()),
            tuple(float(v) for v in np.asarray(bounds, dtype=float)),
            float(radius),
            nominal.shape[1],
        )

    @classmethod
    def ball_center(
        cls,
        owner: int,
        center: Sequence[float],
        radius: float,
        normals: np.ndarray,
        offsets: Sequence[float],
        fixed_rows: np.ndarray | None = None,
        fixed_offsets: Sequence[float] = (),
    ) -> "UncertainConstraintSet":
        """Rows normals . (x - p) <= offsets with p in ball(center, radius)."""
        dim = len(center)
        normals = np.asarray(normals, dtype=float).reshape(-1, dim)
        fixed = np.zeros((0, dim)) if fixed_rows is None else np.asarray(fixed_rows, dtype=float).reshape(-1, dim)
        return cls(
            UncertaintyKind.BALL_CENTER,
            owner,
            tuple(tuple(row) for row in normals.tolist()),
            tuple(float(v) for v in offsets),
            float(radius),
            dim,
            tuple(float(v) for v in center),
            tuple(tuple(row) for row in fixed.tolist()),
            tuple(float(v) for v in fixed_offsets),
        )

    @property
    def n_uncertain(self) -> int:
        return len(self.rows)

    @property
    def n_rows(self) -> int:
        return len(self.rows) + len(self.fixed_rows)

    def _A(self) -> np.ndarray:
        return np.asarray(self.rows, dtype=float).reshape(self.n_uncertain, self.dim)

    def _b(self) -> np.ndarray:
        return np.asarray(self.offsets, dtype=float)

    def _fixed(self) -> tuple[np.ndarray, np.ndarray]:
        A = np.asarray(self.fixed_rows, dtype=float).reshape(len(self.fixed_rows), self.dim)
        return A, np.asarray(self.fixed_offsets, dtype=float)

    def _constraints(self, A: np.ndarray, b: np.ndarray, kind: str, sample: int | None) -> list[LinearConstraint]:
        Af, bf = self._fixed()
        A, b = np.vstack([A, Af]), np.concatenate([b, bf])
        return [
            LinearConstraint.make(A[k], b[k], Provenance(self.owner, kind, sample, k))
            for k in range(self.n_rows)
        ]

    def nominal_constraints(self) -> list[LinearConstraint]:
        """Constraints at the nominal realization (zero deviation / center point)."""
        A, b = self._A(), self._b()
        if self.kind is UncertaintyKind.BALL_CENTER:
            b = b + A @ np.asarray(self.center)
        return self._constraints(A, b, "nominal", None)

    def realize(self, draw: "Draw", kind: str = "sample") -> list[LinearConstraint]:
        """All realized constraints of one draw, fixed rows last."""
        A, b = self._A(), self._b()
        if self.kind is UncertaintyKind.INTERVAL_MATRIX:
            A = A + draw.values
        else:
            b = b + A @ (np.asarray(self.center) + draw.values)
        return self._constraints(A, b, kind, draw.index)

    def residuals(self, x: np.ndarray, values: np.ndarray) -> np.ndarray:
        """Residuals of every row for a batch of draws: shape (draws, rows)."""
        A, b = self._A(), self._b()
        if self.kind is UncertaintyKind.INTERVAL_MATRIX:
            uncertain = np.einsum("mrd,d->mr", A[None, :, :] + values, x) - b[None, :]
        else:
            base = A @ x - b - A @ np.asarray(self.center)
            uncertain = base[None, :] - values @ A.T
        Af, bf = self._fixed()
        fixed = np.broadcast_to(Af @ x - bf, (values.shape[0], len(bf)))
        return np.hstack([uncertain, fixed])


@dataclass(frozen=True)
class Draw:
    """One realization of a node's uncertainty; ``index`` is unique per node."""

    index: int
    values: np.ndarray = field(compare=False)


@dataclass(frozen=True)
class Multisample:
    """A batch of i.i.d. draws with consecutive indices starting at ``first_index``."""

    first_index: int
    values: np.ndarray = field(compare=False)

    def __len__(self) -> int:
        return int(self.values.shape[0])

    def __getitem__(self, k: int) -> Draw:
        return Draw(self.first_index + k, self.values[k])

    def __iter__(self) -> Iterator[Draw]:
        for k in range(len(self)):
            yield self[k]


@dataclass
class SampleSchedule:
    """Accuracy/confidence levels of one node and its verification counter."""

    epsilon: float
    delta: float
    k: int = 1

    def __post_init__(self) -> None:
        _check_levels(self.epsilon, self.delta)
        if self.k < 1:
            raise ValueError("verification counter starts at 1")

    def advance(self) -> None:
        self.k += 1


@dataclass(frozen=True)
class ViolationCertificate:
    """A sampled realization whose constraints are violated at the candidate point."""

    sample: Draw
    constraints: tuple[LinearConstraint, ...]

    def worst_residual(self, x: Point | np.ndarray) -> float:
        return max(con.residual(x) for con in self.constraints)


def _check_levels(epsilon: float, delta: float) -> None:
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon!r}")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta!r}")


def split_levels(epsilon: float, delta: float, n: int) -> tuple[float, float]:
    """Even per-node split of the network levels: (epsilon / n, delta / n)."""
    if n < 1:
        raise ValueError("need at least one node")
    _check_levels(epsilon, delta)
    return epsilon / n, delta / n


# ============================================================================
# SAMPLE SIZES AND BOUNDS
# ============================================================================

def sample_size(schedule: SampleSchedule) -> int:
    """Size of the verification multisample at the schedule's current counter."""
    numerator = SCHEDULE_LOG_XI + SCHEDULE_ALPHA * math.log(schedule.k) + math.log(1.0 / schedule.delta)
    return int(math.ceil(numerator / -math.log1p(-schedule.epsilon)))


def log_binomial_tail(M: int, epsilon: float, h: int) -> float:
    """log of sum_{l=0}^{h-2} C(M, l) eps^l (1 - eps)^(M - l)."""
    top = min(h - 2, M)
    if top < 0:
        return -math.inf
    ell = np.arange(top + 1, dtype=float)
    terms = (
        gammaln(M + 1.0) - gammaln(ell + 1.0) - gammaln(M - ell + 1.0)
        + ell * math.log(epsilon) + (M - ell) * math.log1p(-epsilon)
    )
    return float(logsumexp(terms))


def alamo_bound(epsilon: float, delta: float, h: int) -> int:
    """Analytical sufficient sample size ceil((1.582 / eps)(ln(1/delta) + h - 2))."""
    _check_levels(epsilon, delta)
    if h < 2:
        raise ValueError("Helly number must be at least 2")
    return int(math.ceil(ALAMO_FACTOR / epsilon * (math.log(1.0 / delta) + h - 2)))


def scenario_bound(epsilon: float, delta: float, h: int) -> int:
    """Smallest M whose binomial tail with h - 2 support terms is at most delta."""
    _check_levels(epsilon, delta)
    if h < 2:
        raise ValueError("Helly number must be at least 2")
    log_delta = math.log(delta)
    lo = h - 1
    hi = max(lo, alamo_bound(epsilon, delta, h))
    while log_binomial_tail(hi, epsilon, h) > log_delta:
        hi *= 2
    while lo < hi:
        mid = (lo + hi) // 2
        if log_binomial_tail(mid, epsilon, h) <= log_delta:
            hi = mid
        else:
            lo = mid + 1
    return lo


def verification_counter_threshold(epsilon: float, delta: float, h: int) -> float:
    """Counter value beyond which the verification sample reaches the analytical bound."""
    if not 0.0 < epsilon < 1.0 or not 0.0 < delta <= 1.0:
        raise ValueError("levels must satisfy 0 < epsilon < 1 and 0 < delta <= 1")
    exponent = (
        THRESHOLD_DELTA_WEIGHT * math.log(1.0 / delta)
        + THRESHOLD_HELLY_WEIGHT * (h - 2)
        - SCHEDULE_LOG_XI
    ) / SCHEDULE_ALPHA
    return math.exp(exponent)


# ============================================================================
# SAMPLING AND VERIFICATION
# ============================================================================

def _uniform_ball(rng: np.random.Generator, count: int, dim: int, radius: float) -> np.ndarray:
    """Rejection sampling from the bounding cube."""
    if radius == 0.0 or count == 0:
        return np.zeros((count, dim))
    accepted: list[np.ndarray] = []
    total = 0
    while total < count:
        batch = rng.uniform(-radius, radius, size=(2 * (count - total) + 8, dim))
        inside = batch[np.linalg.norm(batch, axis=1) <= radius]
        accepted.append(inside)
        total += inside.shape[0]
    return np.concatenate(accepted)[:count]


def draw_multisample(
    uset: UncertainConstraintSet,
    M: int,
    rng: np.random.Generator,
    first_index: int = 0,
) -> Multisample:
    """M independent uniform draws of the set's uncertainty."""
    if M < 1:
        raise ValueError("multisample size must be at least 1")
    if uset.kind is UncertaintyKind.INTERVAL_MATRIX:
        values = rng.uniform(-uset.radius, uset.radius, size=(M, uset.n_uncertain, uset.dim))
    else:
        values = _uniform_ball(rng, M, uset.dim, uset.radius)
    return Multisample(first_index, values)


def scan_multisample(
    x: Point | np.ndarray,
    uset: UncertainConstraintSet,
    multisample: Multisample,
    r: int,
    tol: float = FEASIBILITY_TOL,
) -> list[ViolationCertificate]:
    """The first up-to-r draws, in draw order, whose realized rows are violated at x."""
    if r < 1:
        raise ValueError("r must be at least 1")
    if uset.n_rows == 0 or len(multisample) == 0:
        return []
    vec = x.as_array() if isinstance(x, Point) else np.asarray(x, dtype=float)
    violated = uset.residuals(vec, multisample.values) > tol
    hits = np.flatnonzero(violated.any(axis=1))[:r]
    certificates = []
    for k in hits:
        draw = multisample[int(k)]
        rows = uset.realize(draw, kind="certificate")
        certificates.append(
            ViolationCertificate(draw, tuple(rows[j] for j in np.flatnonzero(violated[k])))
        )
    return certificates


def verify(
    x: Point | np.ndarray,
    uset: UncertainConstraintSet,
    schedule: SampleSchedule,
    r: int,
    rng: np.random.Generator,
    first_index: int = 0,
) -> list[ViolationCertificate]:
    """
    Sequential probabilistic verification of a candidate point.

    Draws sample_size(schedule) samples, returns the first r violating ones
    and advances the verification counter.
    """
    multisample = draw_multisample(uset, sample_size(schedule), rng, first_index)
    certificates = scan_multisample(x, uset, multisample, r)
    schedule.advance()
    return certificates
