"""Linear scenario programs: solving, support sets, cascade discarding."""

from .engine import CascadeResult, OrderProgramResult, cascade_discard, solve, solve_order_program, support_set
from .families import (
    FAMILIES,
    AnalyticUnavailable,
    Exponential,
    Gaussian,
    IntervalFamily,
    OrderFamily,
    ProgramFamily,
    RandomLPFamily,
    Uniform,
    ViolationEstimate,
    gen_interval_cover,
    gen_order_problem,
    gen_random_lp,
    make_distribution,
    violation_probability,
)
from .program import (
    ACTIVE_TOL,
    FEAS_TOL,
    MOVE_TOL,
    InfeasibleProgram,
    LinearScenarioProgram,
    ProgramSchemaError,
    ScenarioSolution,
)

__all__ = [
    "ACTIVE_TOL",
    "FEAS_TOL",
    "MOVE_TOL",
    "FAMILIES",
    "AnalyticUnavailable",
    "CascadeResult",
    "Exponential",
    "Gaussian",
    "InfeasibleProgram",
    "IntervalFamily",
    "LinearScenarioProgram",
    "OrderFamily",
    "OrderProgramResult",
    "ProgramFamily",
    "ProgramSchemaError",
    "RandomLPFamily",
    "ScenarioSolution",
    "Uniform",
    "ViolationEstimate",
    "cascade_discard",
    "gen_interval_cover",
    "gen_order_problem",
    "gen_random_lp",
    "make_distribution",
    "solve",
    "solve_order_program",
    "support_set",
    "violation_probability",
]
