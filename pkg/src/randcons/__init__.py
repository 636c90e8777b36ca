"""Randomized constraints consensus for distributed robust mixed-integer programs."""

from .geometry import (  # noqa: F401
    Basis,
    ConstraintSystem,
    LinearConstraint,
    MixedIntegerSpace,
    Point,
    helly_number,
)
from .instance import Instance, load_instance, save_instance  # noqa: F401
from .network import EdgeSchedule, run_simulation  # noqa: F401
from .schema_validator import load_schema, validate_instance  # noqa: F401
from .solver import compute_basis, solve_mip  # noqa: F401
from .uncertainty import (  # noqa: F401
    SampleSchedule,
    UncertainConstraintSet,
    sample_size,
    scenario_bound,
)

__all__ = [
    "Basis",
    "ConstraintSystem",
    "LinearConstraint",
    "MixedIntegerSpace",
    "Point",
    "helly_number",
    "Instance",
    "load_instance",
    "save_instance",
    "EdgeSchedule",
    "run_simulation",
    "load_schema",
    "validate_instance",
    "compute_basis",
    "solve_mip",
    "SampleSchedule",
    "UncertainConstraintSet",
    "sample_size",
    "scenario_bound",
]
