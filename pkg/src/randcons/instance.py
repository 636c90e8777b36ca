"""Problem instances and their JSON file format."""

from __future__ import annotations

from dataclasses import dataclass
import json
import logging
from pathlib import Path
from typing import Any

from .errors import InstanceFormatError
from .geometry import MixedIntegerSpace
from .network import EdgeSchedule, ScheduleMode
from .schema_validator import assert_valid_instance
from .uncertainty import UncertainConstraintSet, UncertaintyKind

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
INSTANCE_KINDS = ("milp", "localization")


@dataclass(frozen=True)
class Instance:
    """Everything a run needs besides the simulation settings."""

    kind: str
    seed: int
    space: MixedIntegerSpace
    objective: tuple[float, ...]
    sets: tuple[UncertainConstraintSet, ...]
    schedule: EdgeSchedule
    epsilons: tuple[float, ...]
    deltas: tuple[float, ...]
    truth: tuple[float, ...] | None = None
    epsilon: float | None = None
    delta: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in INSTANCE_KINDS:
            raise ValueError(f"unknown instance kind: {self.kind}")
        n = len(self.sets)
        if n != self.schedule.n:
            raise ValueError(f"{n} node sets but a schedule on {self.schedule.n} nodes")
        if len(self.epsilons) != n or len(self.deltas) != n:
            raise ValueError("need one (epsilon, delta) pair per node")
        if [s.owner for s in self.sets] != list(range(1, n + 1)):
            raise ValueError("node sets must be owned by nodes 1..n in order")
        if len(self.objective) != self.space.d:
            raise ValueError("objective dimension differs from the space")

    @property
    def n(self) -> int:
        return len(self.sets)

    def with_objective(self, objective: tuple[float, ...]) -> "Instance":
        return Instance(
            self.kind, self.seed, self.space, objective, self.sets, self.schedule,
            self.epsilons, self.deltas, self.truth, self.epsilon, self.delta,
        )

    def to_dict(self) -> dict[str, Any]:
        nodes = []
        for uset, eps, dlt in zip(self.sets, self.epsilons, self.deltas):
            nodes.append({
                "id": uset.owner,
                "kind": uset.kind.value,
                "rows": [list(row) for row in uset.rows],
                "offsets": list(uset.offsets),
                "radius": uset.radius,
                "center": None if uset.center is None else list(uset.center),
                "fixed_rows": [list(row) for row in uset.fixed_rows],
                "fixed_offsets": list(uset.fixed_offsets),
                "epsilon": eps,
                "delta": dlt,
            })
        data: dict[str, Any] = {
            "schema_version": SCHEMA_VERSION,
            "kind": self.kind,
            "seed": self.seed,
            "space": {"d_Z": self.space.d_Z, "d_R": self.space.d_R},
            "objective": list(self.objective),
            "nodes": nodes,
            "schedule": {
                "n": self.schedule.n,
                "mode": self.schedule.mode.value,
                "edge_sets": [sorted([u, v] for u, v in edges) for edges in self.schedule.edge_sets],
                "L": self.schedule.L,
                "loss": self.schedule.loss,
                "seed": self.schedule.seed,
            },
            "truth": None if self.truth is None else list(self.truth),
        }
        if self.epsilon is not None and self.delta is not None:
            data["levels"] = {"epsilon": self.epsilon, "delta": self.delta}
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Instance":
        """Build an instance from schema-valid data."""
        assert_valid_instance(data)
        try:
            return cls._build(data)
        except ValueError as exc:
            raise InstanceFormatError(str(exc)) from exc

    @classmethod
    def _build(cls, data: dict[str, Any]) -> "Instance":
        space = MixedIntegerSpace(data["space"]["d_Z"], data["space"]["d_R"])
        d = space.d
        sets = []
        for node in data["nodes"]:
            sets.append(UncertainConstraintSet(
                kind=UncertaintyKind(node["kind"]),
                owner=node["id"],
                rows=tuple(tuple(float(v) for v in row) for row in node["rows"]),
                offsets=tuple(float(v) for v in node["offsets"]),
                radius=float(node["radius"]),
                dim=d,
                center=None if node.get("center") is None else tuple(node["center"]),
                fixed_rows=tuple(tuple(float(v) for v in row) for row in node.get("fixed_rows", [])),
                fixed_offsets=tuple(float(v) for v in node.get("fixed_offsets", [])),
            ))
        sched = data["schedule"]
        schedule = EdgeSchedule(
            n=sched["n"],
            mode=ScheduleMode(sched["mode"]),
            edge_sets=tuple(frozenset((u, v) for u, v in edges) for edges in sched["edge_sets"]),
            L=sched.get("L", 1),
            loss=sched.get("loss", 0.0),
            seed=sched.get("seed", 0),
        )
        levels = data.get("levels", {})
        return cls(
            kind=data["kind"],
            seed=data["seed"],
            space=space,
            objective=tuple(float(v) for v in data["objective"]),
            sets=tuple(sets),
            schedule=schedule,
            epsilons=tuple(node["epsilon"] for node in data["nodes"]),
            deltas=tuple(node["delta"] for node in data["nodes"]),
            truth=None if data.get("truth") is None else tuple(data["truth"]),
            epsilon=levels.get("epsilon"),
            delta=levels.get("delta"),
        )


def save_instance(instance: Instance, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(instance.to_dict(), indent=2), encoding="utf-8")
    logger.info("wrote %s instance with %d nodes to %s", instance.kind, instance.n, path)
    return path


def load_instance(path: str | Path) -> Instance:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Instance file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"{path} is not valid JSON: {exc}") from exc
    return Instance.from_dict(data)
