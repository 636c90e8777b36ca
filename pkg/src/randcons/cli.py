"""Command-line interface for randcons."""

from __future__ import annotations

import argparse
import dataclasses
import logging
from pathlib import Path
import sys
from typing import Any

from .config import HALT_MODES, NODE_ORDERS, SCENARIO_MODES, SimConfig, SolverConfig, load_config
from .errors import RandconsError
from .experiments import (
    FACES,
    LocalizationSpec,
    MilpInstanceSpec,
    build_localization_instance,
    build_milp_instance,
    posterior_violation,
    run_batch,
    run_instance,
    run_localization,
    summarize_run,
)
from .geometry import MixedIntegerSpace, Point, helly_number
from .instance import load_instance, save_instance
from .network import substream
from .report import (
    convergence_series,
    plot_convergence,
    report,
    write_report_csv,
    write_trace_csv,
)
from .uncertainty import (
    SampleSchedule,
    alamo_bound,
    sample_size,
    scenario_bound,
    verification_counter_threshold,
)

logger = logging.getLogger(__name__)


def _add_generator_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("family", choices=["milp", "localization"], help="Problem family.")
    parser.add_argument("--n", type=int, default=10, help="Number of nodes.")
    parser.add_argument("--seed", type=int, default=0, help="Master seed of the instance.")
    parser.add_argument("--epsilon", type=float, default=0.1, help="Network accuracy level.")
    parser.add_argument("--delta", type=float, default=1e-9, help="Network confidence level.")
    parser.add_argument("--rho", type=float, help="Uncertainty radius (0.2 for milp, 0.1 for localization).")
    milp = parser.add_argument_group("milp")
    milp.add_argument("--constraints", type=int, default=100, help="Constraints per node.")
    milp.add_argument("--dz", type=int, default=2, help="Integer dimension.")
    milp.add_argument("--dr", type=int, default=3, help="Continuous dimension.")
    milp.add_argument("--gamma", type=float, default=20.0, help="Feasibility inflation of b.")
    milp.add_argument("--degree", type=int, default=3, help="k of the k-nearest-neighbor graph.")
    milp.add_argument("--diameter", type=int, default=4, help="Target graph diameter.")
    loc = parser.add_argument_group("localization")
    loc.add_argument("--face", choices=sorted(FACES), default="x_lower", help="Box face to compute.")
    loc.add_argument("--range", dest="comm_range", type=float, default=7.0, help="Sensing range.")
    loc.add_argument("--alpha", type=float, default=20.0, help="Laser accuracy angle in degrees.")
    loc.add_argument("--sides", type=int, default=16, help="Sides of the range polygon.")
    loc.add_argument("--laser-fraction", type=float, default=0.5, help="Fraction of laser anchors.")


def _add_sim_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--max-rounds", type=int, help="Round budget.")
    parser.add_argument("--halt-mode", choices=HALT_MODES, help="Halting threshold rule.")
    parser.add_argument("--scenario-mode", choices=SCENARIO_MODES, help="Scenario freeze detection.")
    parser.add_argument("--r", type=int, help="Violation certificates per verification.")
    parser.add_argument("--staggered", action="store_true", default=None,
                        help="Verify and optimize on alternate rounds.")
    parser.add_argument("--order", choices=NODE_ORDERS, help="Node processing order within a round.")
    parser.add_argument("--parallel", action="store_true", default=None, help="Run nodes of a round in threads.")
    parser.add_argument("--force", action="store_true", default=None,
                        help="Run even if the schedule is not jointly strongly connected.")
    parser.add_argument("--posterior", type=int, default=0,
                        help="A-posteriori samples for the empirical violation (0 disables).")


def _parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    """Parse CLI arguments for the randcons command."""
    parser = argparse.ArgumentParser(
        prog="randcons",
        description="Randomized constraints consensus for distributed robust mixed-integer programs.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0, help="More logging (repeatable).")
    parser.add_argument("--quiet", action="store_true", help="Only log errors.")
    parser.add_argument("--config", help="JSON file with solver and sim overrides.")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="Write an instance file.")
    _add_generator_args(gen)
    gen.add_argument("-o", "--out", required=True, help="Instance JSON path.")

    run = sub.add_parser("run", help="Run the algorithm on an instance file.")
    run.add_argument("instance", help="Instance JSON path.")
    run.add_argument("--seed", type=int, help="Simulation seed (defaults to the instance seed).")
    _add_sim_args(run)
    run.add_argument("--trace", help="Write the trace CSV here.")
    run.add_argument("--report", help="Write the report CSV here.")
    run.add_argument("--plot", help="Write the convergence SVG here.")

    bounds = sub.add_parser("bounds", help="Print sample sizes and bounds.")
    bounds.add_argument("--epsilon", type=float, required=True)
    bounds.add_argument("--delta", type=float, required=True)
    helly = bounds.add_mutually_exclusive_group(required=True)
    helly.add_argument("--h", type=int, help="Helly number.")
    helly.add_argument("--space", nargs=2, type=int, metavar=("D_Z", "D_R"),
                       help="Mixed-integer dimensions; the Helly number is derived.")
    bounds.add_argument("--k", type=int, default=1, help="Verification counter.")

    post = sub.add_parser("posterior", help="Empirical violation of a point on an instance.")
    post.add_argument("instance", help="Instance JSON path.")
    post.add_argument("--x", required=True, help="Comma-separated point coordinates.")
    post.add_argument("--samples", type=int, default=10_000)
    post.add_argument("--seed", type=int, default=0)

    batch = sub.add_parser("batch", help="Multi-seed runs averaged into a table row.")
    _add_generator_args(batch)
    _add_sim_args(batch)
    batch.add_argument("--runs", type=int, default=10, help="Number of seeds, starting at --seed.")
    batch.add_argument("--workers", type=int, default=1, help="Runs executed in parallel.")
    batch.add_argument("-o", "--out", required=True, help="Report CSV path.")
    return parser.parse_args(argv)


def _configure_logging(args: argparse.Namespace) -> None:
    if args.quiet:
        level = logging.ERROR
    else:
        level = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _configs(args: argparse.Namespace) -> tuple[SolverConfig, SimConfig]:
    solver, sim = SolverConfig(), SimConfig()
    if args.config:
        solver, sim = load_config(Path(args.config).expanduser().resolve())
    overrides: dict[str, Any] = {}
    for name in ("max_rounds", "halt_mode", "scenario_mode", "r", "staggered", "order", "parallel", "force"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    return solver, dataclasses.replace(sim, **overrides)


def _milp_spec(args: argparse.Namespace, seed: int) -> MilpInstanceSpec:
    return MilpInstanceSpec(
        n=args.n, constraints_per_node=args.constraints, d_Z=args.dz, d_R=args.dr,
        rho=0.2 if args.rho is None else args.rho, gamma=args.gamma, epsilon=args.epsilon,
        delta=args.delta, degree=args.degree, diameter=args.diameter, seed=seed,
    )


def _localization_spec(args: argparse.Namespace, seed: int) -> LocalizationSpec:
    return LocalizationSpec(
        n=args.n, comm_range=args.comm_range, alpha_deg=args.alpha, laser_fraction=args.laser_fraction,
        rho=0.1 if args.rho is None else args.rho, sides=args.sides, face=args.face,
        epsilon=args.epsilon, delta=args.delta, seed=seed,
    )


def _cmd_generate(args: argparse.Namespace) -> int:
    if args.family == "milp":
        instance = build_milp_instance(_milp_spec(args, args.seed))
    else:
        instance = build_localization_instance(_localization_spec(args, args.seed))
    out_path = save_instance(instance, Path(args.out).expanduser().resolve())
    print(f"OK: wrote {out_path}")
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    instance = load_instance(Path(args.instance).expanduser().resolve())
    solver, sim = _configs(args)
    sim = dataclasses.replace(sim, seed=instance.seed if args.seed is None else args.seed)
    result, nodes = run_instance(instance, sim, solver)
    record = summarize_run(instance, result, nodes, args.posterior, solver)
    print(f"outcome: {record.outcome} after {record.rounds} rounds")
    print(f"cost: {record.cost:.10g}")
    print(f"solution: {', '.join(f'{v:.10g}' for v in record.solution)}")
    print(f"nodes agree: {record.agree}")
    print(f"transmissions per node: {record.transmissions:.2f}")
    print(f"verifications per node: {record.verifications:.2f}")
    if record.violation is not None:
        print(f"empirical violation: {record.violation:.4g}")
    if args.trace:
        print(f"OK: wrote {write_trace_csv(result.traces, Path(args.trace).expanduser().resolve())}")
    if args.report:
        print(f"OK: wrote {write_report_csv([record], Path(args.report).expanduser().resolve())}")
    if args.plot:
        series = convergence_series(result.traces, record.solution, record.cost)
        print(f"OK: wrote {plot_convergence(series, Path(args.plot).expanduser().resolve(), instance.kind)}")
    return 0 if result.halted else 2


def _cmd_bounds(args: argparse.Namespace) -> int:
    h = args.h if args.h is not None else helly_number(MixedIntegerSpace(*args.space))
    print(f"h: {h}")
    print(f"sample_size(k={args.k}): {sample_size(SampleSchedule(args.epsilon, args.delta, args.k))}")
    print(f"scenario_bound: {scenario_bound(args.epsilon, args.delta, h)}")
    print(f"alamo_bound: {alamo_bound(args.epsilon, args.delta, h)}")
    print(f"verification_counter_threshold: {verification_counter_threshold(args.epsilon, args.delta, h):.4g}")
    return 0


def _cmd_posterior(args: argparse.Namespace) -> int:
    instance = load_instance(Path(args.instance).expanduser().resolve())
    coords = [float(v) for v in args.x.split(",")]
    point = Point.in_space(coords, instance.space)
    fraction = posterior_violation(point, instance.sets, args.samples, substream(args.seed, 0, "posterior"))
    print(f"empirical violation: {fraction:.6g} over {args.samples} samples")
    return 0


def _cmd_batch(args: argparse.Namespace) -> int:
    solver, sim = _configs(args)
    seeds = list(range(args.seed, args.seed + args.runs))
    if args.family == "milp":
        records = run_batch(
            lambda seed: build_milp_instance(_milp_spec(args, seed)),
            seeds, sim, solver, args.posterior, args.workers,
        )
    else:
        records = []
        for seed in seeds:
            run = run_localization(
                _localization_spec(args, seed), dataclasses.replace(sim, seed=seed), solver, args.posterior
            )
            records.append(run.records[args.face])
            print(f"seed {seed}: box x [{run.box['x_lower']:.4f}, {run.box['x_upper']:.4f}] "
                  f"y [{run.box['y_lower']:.4f}, {run.box['y_upper']:.4f}], truth inside: {run.contains_truth()}")
    summary = report(records)
    print(f"halted: {summary.halted}/{summary.runs}")
    print(f"transmissions per node: {summary.transmissions:.2f}")
    print(f"verifications per node: {summary.verifications:.2f}")
    if summary.violation is not None:
        print(f"empirical violation: {summary.violation:.4g}")
    print(f"OK: wrote {write_report_csv(records, Path(args.out).expanduser().resolve())}")
    return 0


COMMANDS = {
    "generate": _cmd_generate,
    "run": _cmd_run,
    "bounds": _cmd_bounds,
    "posterior": _cmd_posterior,
    "batch": _cmd_batch,
}


def main(argv: list[str] | None = None) -> int:
    """Entry point for the randcons CLI."""
    args = _parse_args(argv)
    _configure_logging(args)
    try:
        return COMMANDS[args.command](args)
    except (RandconsError, FileNotFoundError, ValueError) as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
