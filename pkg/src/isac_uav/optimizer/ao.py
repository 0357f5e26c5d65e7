"""Per-interval planner: feasibility layer, then alternating optimization of
trajectories and bandwidth shares."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..estimation import SingularInformationError
from ..scenario import Scenario
from .constraints import Violation, constraint_violations
from .convex import InfeasibleRegionError
from .descent import IntervalProblem, SearchParams, optimize_bandwidth, optimize_trajectory
from .feasibility import (
    Association,
    InfeasibleBoundsError,
    check_feasibility,
    comm_optimal_bandwidth,
    minimum_shares,
    serving_rates,
)
from .objective import PcrbObjective


@dataclass
class SwarmDecision:
    positions: np.ndarray
    shares: np.ndarray
    association: Association
    objective_value: float
    feasible: bool
    rate_floor: float  # R_c* of the communication-optimal solution, bit/s
    rates: np.ndarray  # achieved per-UAV rates, bit/s
    fallback: bool = False
    violations: list[Violation] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)


def initial_shares(Q_prev, eta_prev, association: Association, scenario: Scenario,
                   fallback_shares: np.ndarray) -> np.ndarray:
    """Previous shares if they still meet R_th at Q_prev, else a feasible repair."""
    lower = minimum_shares(Q_prev, association, scenario)
    eta_prev = np.asarray(eta_prev, dtype=float)
    if eta_prev.shape == lower.shape and np.all(eta_prev >= lower) and abs(eta_prev.sum() - 1) < 1e-9:
        return eta_prev
    if lower.sum() <= 1.0:
        return comm_optimal_bandwidth(Q_prev, association, scenario)[0]
    return np.asarray(fallback_shares, dtype=float)


def alternating_optimize(objective: PcrbObjective, problem: IntervalProblem, Q0, eta0,
                         params: SearchParams = SearchParams(), *, move: bool = True,
                         allocate: bool = True):
    """Alternate the trajectory search and the bandwidth search.

    Stops when the relative objective decrease of one round is at most
    ``params.epsilon`` or after ``params.ao_cap`` rounds. ``move=False`` freezes
    positions, ``allocate=False`` freezes shares. Returns (Q, eta, diagnostics).
    """
    Q = np.asarray(Q0, dtype=float)
    eta = np.asarray(eta0, dtype=float)
    f_seq: list[float] = []
    start_ok = bool(problem.feasible(Q, eta))
    if start_ok:
        f_seq.append(objective.value(Q, eta))
    trajectory_traces, bw_traces = [], []
    hit_cap = True
    for _ in range(params.ao_cap):
        traj_stalled = not move
        if move:
            Q, tr = optimize_trajectory(objective, problem, Q, eta, params)
            trajectory_traces.append(tr.to_dict())
            traj_stalled = bool(tr.omegas) and tr.omegas[-1] == 0.0
        eta_before = eta
        if allocate:
            eta, tr = optimize_bandwidth(objective, problem, Q, eta, params)
            bw_traces.append(tr.to_dict())
        f = objective.value(Q, eta)
        prev = f_seq[-1] if f_seq else np.inf
        f_seq.append(f)
        if np.isfinite(prev) and (prev - f) / prev <= params.epsilon:
            hit_cap = False
            break
        if not (move and allocate) or (traj_stalled and np.array_equal(eta, eta_before)):
            # one block only, or a fixed point: another round would repeat this one
            hit_cap = False
            break
    diag = {
        "ao_objective": f_seq,
        "ao_start_feasible": start_ok,
        "ao_hit_cap": hit_cap,
        "trajectory_searches": trajectory_traces,
        "bandwidth_searches": bw_traces,
    }
    return Q, eta, diag


def plan_interval(objective: PcrbObjective, Q_prev, eta_prev, scenario: Scenario,
                  params: SearchParams = SearchParams(), *, move: bool = True,
                  allocate: bool = True, fixed_shares=None) -> SwarmDecision:
    """Full per-interval decision.

    Association and feasibility come from the communication-optimal solution
    at the previous positions. If that is infeasible, or the surrogate
    trajectory region is empty, the communication-optimal trajectory and
    shares are used instead and the decision is marked as a fallback.
    """
    Q_prev = np.asarray(Q_prev, dtype=float)
    report = check_feasibility(Q_prev, scenario)
    assoc = report.association
    problem = IntervalProblem(scenario, Q_prev, objective.target_position, assoc)
    diag: dict = {"rate_floor": report.rate_floor, "comm_feasible": report.feasible}
    fallback = not report.feasible
    if move:
        fb_Q, fb_eta = report.positions, report.shares
    else:
        fb_Q, fb_eta = Q_prev, comm_optimal_bandwidth(Q_prev, assoc, scenario)[0]
    Q, eta = fb_Q, fb_eta
    if not fallback:
        if fixed_shares is not None:
            eta0 = np.broadcast_to(np.asarray(fixed_shares, dtype=float), (scenario.num_uavs,))
        else:
            eta0 = initial_shares(Q_prev, eta_prev, assoc, scenario, report.shares)
        try:
            Q, eta, ao_diag = alternating_optimize(objective, problem, Q_prev, eta0, params,
                                                   move=move, allocate=allocate)
            diag.update(ao_diag)
        except (InfeasibleRegionError, InfeasibleBoundsError, SingularInformationError) as exc:
            diag["fallback_reason"] = f"{type(exc).__name__}: {exc}"
            fallback = True
            Q, eta = fb_Q, fb_eta
    else:
        diag["fallback_reason"] = (f"R_c* = {report.rate_floor:.6g} bit/s below R_th = "
                                   f"{scenario.rate_threshold_bps:.6g}")
    violations = constraint_violations(Q, eta, assoc, Q_prev, objective.target_position, scenario)
    return SwarmDecision(
        positions=np.array(Q), shares=np.array(eta), association=assoc,
        objective_value=float(objective.value(Q, eta)), feasible=not violations,
        rate_floor=report.rate_floor, rates=eta * serving_rates(Q, assoc, scenario),
        fallback=fallback, violations=violations, diagnostics=diag)
