"""Per-interval optimization of UAV positions, bandwidth shares and association."""

from .ao import SwarmDecision, alternating_optimize, plan_interval
from .constraints import Violation, constraint_violations
from .convex import ConvexProgram, InfeasibleRegionError, solve_linear_program
from .descent import (
    IntervalProblem,
    SearchParams,
    bandwidth_descent_step,
    line_search,
    optimize_bandwidth,
    optimize_trajectory,
    trajectory_descent_step,
)
from .feasibility import (
    Association,
    AssociationInfeasibleError,
    FeasibilityReport,
    InfeasibleBoundsError,
    check_feasibility,
    comm_optimal_bandwidth,
    comm_optimal_positions,
    solve_association,
)
from .objective import PcrbObjective

__all__ = [
    "Association", "AssociationInfeasibleError", "ConvexProgram", "FeasibilityReport",
    "InfeasibleBoundsError", "InfeasibleRegionError", "IntervalProblem", "PcrbObjective",
    "SearchParams", "SwarmDecision", "Violation", "alternating_optimize",
    "bandwidth_descent_step", "check_feasibility", "comm_optimal_bandwidth",
    "comm_optimal_positions", "constraint_violations", "line_search", "optimize_bandwidth",
    "optimize_trajectory", "plan_interval", "solve_association", "solve_linear_program",
    "trajectory_descent_step",
]
