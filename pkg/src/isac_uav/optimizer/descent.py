"""Descent-direction search for trajectories and bandwidth shares.

Each iteration linearizes the objective at the current point, solves the
convex direction-finding program for the best point of the (surrogate)
feasible set, and then picks the best step along the segment from a uniform
grid of step sizes that contains the null step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..comm import control_radius_dth, rate_ball_radius_sq
from ..scenario import Scenario
from .constraints import trajectory_feasible
from .convex import ConvexProgram, InfeasibleRegionError, SolveInfo, solve_linear_program
from .feasibility import Association, InfeasibleBoundsError, minimum_shares
from .objective import PcrbObjective

# Relative objective change treated as rounding noise when comparing step sizes.
TIE_RTOL = 1e-12
# Exact-feasibility slack accepted for line-search candidates.
SEARCH_TOL = 1e-9


@dataclass(frozen=True)
class SearchParams:
    epsilon: float = 1e-3
    delta_omega: float = 0.01
    ao_cap: int = 20
    trajectory_cap: int = 15
    bandwidth_cap: int = 15
    sca_cap: int = 30
    sca_tol: float = 1e-4  # relative to V_max*dt; 1% of the default line-search step

    def __post_init__(self):
        if not 0 < self.delta_omega <= 1:
            raise ValueError(f"delta_omega must lie in (0, 1], got {self.delta_omega}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")


@dataclass
class SearchTrace:
    """Objective sequence and bookkeeping of one descent search."""

    objective: list[float] = field(default_factory=list)
    omegas: list[float] = field(default_factory=list)
    sca_iterations: list[int] = field(default_factory=list)
    solver: list[SolveInfo] = field(default_factory=list)
    start_feasible: bool = True
    hit_cap: bool = False

    def to_dict(self) -> dict:
        return {
            "objective": self.objective,
            "omegas": self.omegas,
            "sca_iterations": self.sca_iterations,
            "barrier_newton_steps": [s.newton_steps for s in self.solver],
            "kkt_residual": [s.kkt_residual for s in self.solver],
            "start_feasible": self.start_feasible,
            "hit_cap": self.hit_cap,
        }


@dataclass(frozen=True)
class IntervalProblem:
    """Geometry of one interval's trajectory sub-problem."""

    scenario: Scenario
    prev_positions: np.ndarray
    target_pred: np.ndarray
    association: Association
    dth: float = field(init=False)
    serving_bs: np.ndarray = field(init=False)
    control_bs: np.ndarray = field(init=False)
    control_free: np.ndarray = field(init=False)

    def __post_init__(self):
        sc = self.scenario
        Q_prev = np.asarray(self.prev_positions, dtype=float)
        object.__setattr__(self, "prev_positions", Q_prev)
        object.__setattr__(self, "target_pred", np.asarray(self.target_pred, dtype=float)[:2])
        dth = control_radius_dth(sc)
        bs = sc.bs_array
        nearest = np.argmin(np.sum((Q_prev[:, None, :] - bs) ** 2, axis=-1), axis=1)
        near_dist = np.hypot(*(Q_prev - bs[nearest]).T)
        object.__setattr__(self, "dth", dth)
        object.__setattr__(self, "serving_bs", bs[self.association.bs_index])
        object.__setattr__(self, "control_bs", bs[nearest])
        # Deep inside a control disk every reachable point keeps the link.
        object.__setattr__(self, "control_free", near_dist <= dth - sc.max_step_m)

    @property
    def num_uavs(self) -> int:
        return len(self.prev_positions)

    def build_program(self, expansion, eta) -> ConvexProgram:
        """Convex surrogate of the trajectory constraints around ``expansion``."""
        sc = self.scenario
        M = self.num_uavs
        Qr = np.asarray(expansion, dtype=float)
        prog = ConvexProgram(M)
        rate_sq = rate_ball_radius_sq(np.asarray(eta, dtype=float), sc)
        for m in range(M):
            if rate_sq[m] <= 0:
                raise InfeasibleRegionError(
                    f"rate[{m}]: share {eta[m]:.4g} cannot meet R_th anywhere", [f"rate[{m}]"])
            prog.add_ball(m, self.serving_bs[m], np.sqrt(rate_sq[m]), f"rate[{m}]")
            if not self.control_free[m]:
                prog.add_ball(m, self.control_bs[m], self.dth, f"control[{m}]")
            prog.add_ball(m, self.prev_positions[m], sc.max_step_m, f"speed[{m}]")
        ds2 = sc.safety_distance_m**2
        for i in range(M):
            for j in range(i + 1, M):
                dr = Qr[i] - Qr[j]
                a = np.zeros(2 * M)
                a[2 * i: 2 * i + 2] = -2 * dr
                a[2 * j: 2 * j + 2] = 2 * dr
                prog.add_halfspace(a, -ds2 - dr @ dr, f"uav_separation[{i},{j}]")
        for m in range(M):
            e = Qr[m] - self.target_pred
            a = np.zeros(2 * M)
            a[2 * m: 2 * m + 2] = -2 * e
            prog.add_halfspace(a, e @ e - 2 * e @ Qr[m] - ds2, f"target_separation[{m}]")
        return prog

    def restoration_point(self, Q) -> np.ndarray:
        """Expansion point for an infeasible start.

        UAVs too close to the predicted target take a full step straight away
        from it; the others stay at ``Q``. Linearizing the separation
        constraints at an infeasible point can empty the surrogate set even
        when the true set is not, so SCA restarts from here.
        """
        Q = np.array(Q, dtype=float)
        sc = self.scenario
        away = self.prev_positions - self.target_pred
        dist = np.hypot(away[:, 0], away[:, 1])
        close = np.hypot(*(Q - self.target_pred).T) < sc.safety_distance_m
        for m in np.flatnonzero(close & (dist > 0)):
            Q[m] = self.prev_positions[m] + sc.max_step_m * away[m] / dist[m]
        return Q

    def feasible(self, Q, eta, tol: float = SEARCH_TOL) -> np.ndarray:
        return trajectory_feasible(Q, eta, self.serving_bs, self.prev_positions,
                                   self.target_pred, self.scenario, self.dth, tol)


def trajectory_descent_step(problem: IntervalProblem, Q_l, grad_q, eta,
                            params: SearchParams = SearchParams()):
    """Best point of the surrogate feasible set for the linearized objective.

    The safety surrogates are re-linearized at each solution until the point
    stops moving. If ``Q_l`` itself is infeasible and its surrogate set is
    empty, SCA restarts from ``problem.restoration_point``.
    Returns (Q*, sca_iterations, solver_infos).
    """
    Qr = np.asarray(Q_l, dtype=float)
    cost = np.asarray(grad_q, dtype=float).ravel()
    scale = problem.scenario.max_step_m
    infos = []
    for r in range(1, params.sca_cap + 1):
        try:
            x, info = solve_linear_program(problem.build_program(Qr, eta), cost, Qr.ravel())
        except InfeasibleRegionError:
            if r > 1 or problem.feasible(Qr, eta):
                raise
            Qr = problem.restoration_point(Qr)
            x, info = solve_linear_program(problem.build_program(Qr, eta), cost, Qr.ravel())
        infos.append(info)
        Qn = x.reshape(Qr.shape)
        moved = np.max(np.abs(Qn - Qr))
        Qr = Qn
        if moved <= params.sca_tol * scale:
            break
    return Qr, r, infos


def line_search(start, end, objective_batch, feasible_batch, delta_omega: float):
    """Grid search of w in {0, dw, ..., 1} on start + w (end - start).

    ``objective_batch`` and ``feasible_batch`` take a stacked array of
    candidates. Infeasible candidates are skipped; among the rest the lowest
    objective wins, with the null step kept when the gain is rounding noise.
    Returns (w*, point, value); value is nan if no candidate is feasible.
    """
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)
    n = int(round(1.0 / delta_omega))
    omegas = np.minimum(np.arange(n + 1) * delta_omega, 1.0)
    if n * delta_omega < 1.0 - 1e-12:
        omegas = np.append(omegas, 1.0)
    shape = (len(omegas),) + (1,) * start.ndim
    cands = start + omegas.reshape(shape) * (end - start)
    ok = np.asarray(feasible_batch(cands), dtype=bool)
    if not ok.any():
        return 0.0, start, float("nan")
    values = np.full(len(omegas), np.inf)
    values[ok] = objective_batch(cands[ok])
    best = int(np.argmin(values))
    if ok[0] and values[0] - values[best] <= TIE_RTOL * abs(values[0]):
        best = 0
    return float(omegas[best]), cands[best], float(values[best])


def optimize_trajectory(objective: PcrbObjective, problem: IntervalProblem, Q0, eta,
                        params: SearchParams = SearchParams()):
    """Descent-direction search over positions with shares fixed."""
    eta = np.asarray(eta, dtype=float)
    Q = np.asarray(Q0, dtype=float)
    trace = SearchTrace()
    trace.start_feasible = bool(problem.feasible(Q, eta))
    f = objective.value(Q, eta) if trace.start_feasible else float("inf")
    if trace.start_feasible:
        trace.objective.append(f)
    obj = lambda C: objective.value(C, eta)  # noqa: E731
    feas = lambda C: problem.feasible(C, eta)  # noqa: E731
    for it in range(params.trajectory_cap):
        grad_q, _ = objective.gradients(Q, eta)
        Q_star, n_sca, infos = trajectory_descent_step(problem, Q, grad_q, eta, params)
        trace.sca_iterations.append(n_sca)
        trace.solver.extend(infos)
        omega, Q_next, f_next = line_search(Q, Q_star, obj, feas, params.delta_omega)
        if not np.isfinite(f_next):
            raise InfeasibleRegionError("no feasible step along the descent direction",
                                        ["line_search"])
        trace.omegas.append(omega)
        trace.objective.append(f_next)
        rel = (f - f_next) / f if np.isfinite(f) else np.inf
        Q, f = Q_next, f_next
        if rel <= params.epsilon or omega == 0.0:
            # a null step would repeat this iteration exactly
            break
    else:
        trace.hit_cap = True
    return Q, trace


def bandwidth_descent_step(eta_l, grad_eta, lower):
    """Vertex of {eta >= lower, sum eta = 1} minimizing the linearized objective.

    All coordinates sit at their bounds except the one with the smallest
    gradient (lowest index on ties), which takes the remaining mass.
    """
    lower = np.asarray(lower, dtype=float)
    slack = 1.0 - lower.sum()
    if slack < -1e-12:
        raise InfeasibleBoundsError(f"minimum shares sum to {lower.sum():.6g} > 1")
    m = int(np.argmin(np.asarray(grad_eta)))
    out = lower.copy()
    out[m] = 1.0 - (lower.sum() - lower[m])
    return out


def optimize_bandwidth(objective: PcrbObjective, problem: IntervalProblem, Q, eta0,
                       params: SearchParams = SearchParams()):
    """Descent-direction search over shares with positions fixed."""
    Q = np.asarray(Q, dtype=float)
    lower = minimum_shares(Q, problem.association, problem.scenario)
    if lower.sum() > 1 + 1e-12:
        raise InfeasibleBoundsError(f"minimum shares sum to {lower.sum():.6g} > 1")
    eta = np.asarray(eta0, dtype=float)
    floor = lower * (1 - SEARCH_TOL)
    trace = SearchTrace()
    trace.start_feasible = bool(np.all(eta >= floor))
    f = objective.value(Q, eta) if trace.start_feasible else float("inf")
    if trace.start_feasible:
        trace.objective.append(f)

    def obj(E):
        return objective.value(np.broadcast_to(Q, E.shape + (2,)), E)

    def feas(E):
        return np.all(E >= floor, axis=-1)

    for it in range(params.bandwidth_cap):
        _, grad_eta = objective.gradients(Q, eta)
        eta_star = bandwidth_descent_step(eta, grad_eta, lower)
        omega, eta_next, f_next = line_search(eta, eta_star, obj, feas, params.delta_omega)
        trace.omegas.append(omega)
        trace.objective.append(f_next)
        rel = (f - f_next) / f if np.isfinite(f) else np.inf
        eta, f = eta_next, f_next
        if rel <= params.epsilon or omega == 0.0:
            break
    else:
        trace.hit_cap = True
    return eta, trace
