"""Game-theoretic patrol planning on the time-unrolled park graph."""

from .external import AdapterUnavailableError, find_solver, solve_external, write_lp_file
from .graph import PlanInfeasibleError, PlannerError, TimeUnrolledGraph, build_graph
from .milp import MilpModel, PlanProblem, assemble_milp, branch_and_bound, objective_of_coverage
from .simplex import LpResult, solve_lp
from .solve import (
    PatrolPlan,
    decompose_routes,
    improvement_ratio,
    solve,
    solve_by_enumeration,
    utilities_convex,
)

__all__ = [
    "AdapterUnavailableError",
    "LpResult",
    "MilpModel",
    "PatrolPlan",
    "PlanInfeasibleError",
    "PlanProblem",
    "PlannerError",
    "TimeUnrolledGraph",
    "assemble_milp",
    "branch_and_bound",
    "build_graph",
    "decompose_routes",
    "find_solver",
    "improvement_ratio",
    "objective_of_coverage",
    "solve",
    "solve_by_enumeration",
    "solve_external",
    "solve_lp",
    "utilities_convex",
    "write_lp_file",
]
