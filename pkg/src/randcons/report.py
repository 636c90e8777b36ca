"""
Run summaries, CSV export and convergence plots.

Trace CSV columns: t, node, event, cost, basis_size, k_i.
Report CSV columns: seed, outcome, rounds, transmissions, verifications,
violation, cost_increase, cost, agree.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
import logging
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ["t", "node", "event", "cost", "basis_size", "k_i"]
REPORT_COLUMNS = [
    "seed", "outcome", "rounds", "transmissions", "verifications",
    "violation", "cost_increase", "cost", "agree",
]
FLOAT_FORMAT = "%.17g"


@dataclass(frozen=True)
class RunRecord:
    """Metrics of one run; transmissions and verifications are per-node means."""

    seed: int
    outcome: str
    rounds: int
    transmissions: float
    verifications: float
    violation: float | None
    cost_increase: float | None
    cost: float
    agree: bool
    solution: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        for value in (self.violation, self.cost_increase):
            if value is not None and not 0.0 <= value <= 1.0:
                raise ValueError(f"empirical fraction {value!r} outside [0, 1]")


@dataclass(frozen=True)
class RunReport:
    runs: int
    halted: int
    transmissions: float
    verifications: float
    violation: float | None
    cost_increase: float | None
    rounds: float
    cost: float

    def as_row(self) -> dict[str, object]:
        return asdict(self)


def _mean(values: Sequence[float | None]) -> float | None:
    present = [v for v in values if v is not None]
    return float(np.mean(present)) if present else None


def report(records: Sequence[RunRecord]) -> RunReport:
    """Average a batch of runs; the result does not depend on run order."""
    if not records:
        raise ValueError("report needs at least one run")
    ordered = sorted(records, key=lambda rec: rec.seed)
    return RunReport(
        runs=len(ordered),
        halted=sum(rec.outcome == "halted" for rec in ordered),
        transmissions=float(np.mean([rec.transmissions for rec in ordered])),
        verifications=float(np.mean([rec.verifications for rec in ordered])),
        violation=_mean([rec.violation for rec in ordered]),
        cost_increase=_mean([rec.cost_increase for rec in ordered]),
        rounds=float(np.mean([rec.rounds for rec in ordered])),
        cost=float(np.mean([rec.cost for rec in ordered])),
    )


def records_frame(records: Sequence[RunRecord]) -> pd.DataFrame:
    rows = [{col: getattr(rec, col) for col in REPORT_COLUMNS} for rec in records]
    return pd.DataFrame(rows, columns=REPORT_COLUMNS)


def write_report_csv(records: Sequence[RunRecord], path: str | Path) -> Path:
    """Per-run rows followed by a ``mean`` row."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = records_frame(records)
    summary = report(records)
    mean_row = {
        "seed": "mean", "outcome": f"{summary.halted}/{summary.runs} halted",
        "rounds": summary.rounds, "transmissions": summary.transmissions,
        "verifications": summary.verifications, "violation": summary.violation,
        "cost_increase": summary.cost_increase, "cost": summary.cost,
        "agree": all(rec.agree for rec in records),
    }
    frame = pd.concat([frame, pd.DataFrame([mean_row], columns=REPORT_COLUMNS)], ignore_index=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def trace_frame(traces: Sequence) -> pd.DataFrame:
    rows = [
        {"t": ev.t, "node": ev.node, "event": ev.event.value, "cost": ev.cost,
         "basis_size": ev.basis_size, "k_i": ev.k}
        for ev in traces
    ]
    return pd.DataFrame(rows, columns=TRACE_COLUMNS)


def write_trace_csv(traces: Sequence, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    trace_frame(traces).to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def convergence_series(traces: Sequence, solution: Sequence[float], solution_cost: float) -> pd.DataFrame:
    """
    Per node and round, distance of the candidate cost and point to the final
    solution. Built from optimization events.
    """
    target = np.asarray(solution, dtype=float)
    rows = []
    for ev in traces:
        if ev.event.value != "optimize":
            continue
        rows.append({
            "t": ev.t,
            "node": ev.node,
            "cost_gap": abs(ev.cost - solution_cost),
            "distance": float(np.linalg.norm(np.asarray(ev.point) - target)),
        })
    return pd.DataFrame(rows, columns=["t", "node", "cost_gap", "distance"])


def plot_convergence(series: pd.DataFrame, path: str | Path, title: str = "") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, (ax_cost, ax_point) = plt.subplots(2, 1, sharex=True, figsize=(7, 6))
    for node, group in series.groupby("node"):
        ax_cost.plot(group["t"], group["cost_gap"], linewidth=1, label=f"node {node}")
        ax_point.plot(group["t"], group["distance"], linewidth=1)
    ax_cost.set_ylabel("|J(B_i(t)) - J_sol|")
    ax_point.set_ylabel("||x_i(t) - x_sol||")
    ax_point.set_xlabel("round t")
    if title:
        ax_cost.set_title(title)
    if series["node"].nunique() <= 12:
        ax_cost.legend(fontsize="small", ncol=2)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    logger.info("wrote convergence plot %s", path)
    return path
