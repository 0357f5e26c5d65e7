"""Communication-optimal layer: max-min bandwidth split, UAV-BS association,
fly-to-BS trajectory and the resulting feasibility test."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment, linprog

from ..comm import full_band_rate
from ..scenario import Scenario


class AssociationInfeasibleError(ValueError):
    pass


class InfeasibleBoundsError(ValueError):
    """Per-UAV minimum bandwidth shares sum to more than the whole band."""


@dataclass(frozen=True)
class Association:
    matrix: np.ndarray  # (M, K) of 0/1

    def __post_init__(self):
        a = np.asarray(self.matrix, dtype=int)
        a.flags.writeable = False
        object.__setattr__(self, "matrix", a)

    @classmethod
    def from_indices(cls, bs_index, num_bs: int) -> Association:
        idx = np.asarray(bs_index, dtype=int)
        a = np.zeros((len(idx), num_bs), dtype=int)
        a[np.arange(len(idx)), idx] = 1
        return cls(a)

    @property
    def bs_index(self) -> np.ndarray:
        """Serving BS per UAV (-1 if unassociated)."""
        idx = np.argmax(self.matrix, axis=1)
        return np.where(self.matrix.sum(axis=1) > 0, idx, -1)

    def is_valid(self, max_assoc: int) -> bool:
        a = self.matrix
        return bool(np.all((a == 0) | (a == 1)) and np.all(a.sum(axis=1) <= 1)
                    and np.all(a.sum(axis=0) <= max_assoc))

    def __eq__(self, other):
        return isinstance(other, Association) and np.array_equal(self.matrix, other.matrix)

    def __hash__(self):
        return hash(self.matrix.tobytes())


def serving_rates(Q, association: Association, scenario: Scenario) -> np.ndarray:
    """Full-band rate R~_m of each UAV to its serving BS."""
    bs = scenario.bs_array[association.bs_index]
    return full_band_rate(np.asarray(Q, dtype=float), bs, scenario)


def comm_optimal_bandwidth(Q, association: Association, scenario: Scenario):
    """Max-min fair shares eta_m = (1/R~_m) / sum_j (1/R~_j) and the common rate."""
    idx = association.bs_index
    if np.any(idx < 0):
        raise ValueError("every UAV must be associated with a BS")
    inv = 1.0 / serving_rates(Q, association, scenario)
    total = inv.sum()
    return inv / total, float(1.0 / total)


def association_costs(Q_prev, scenario: Scenario) -> np.ndarray:
    """b_{m,k} = 1 / R~ at the previous positions, shape (M, K)."""
    Q_prev = np.asarray(Q_prev, dtype=float)
    return 1.0 / full_band_rate(Q_prev[:, None, :], scenario.bs_array[None, :, :], scenario)


def solve_association(Q_prev, scenario: Scenario, method: str = "exact") -> Association:
    """Min-cost association with BS capacities.

    ``exact`` solves the (totally unimodular) problem as an assignment over
    capacity-expanded BS slots; ``relax_round`` solves the LP relaxation and
    keeps the largest entry of each row.
    """
    M, K, Na = scenario.num_uavs, scenario.num_bs, scenario.max_assoc
    if Na * K < M:
        raise AssociationInfeasibleError(f"N_a*K = {Na * K} < M = {M}")
    cost = association_costs(Q_prev, scenario) * scenario.total_bandwidth_hz
    if method == "exact":
        slots = min(Na, M)
        expanded = np.repeat(cost, slots, axis=1)  # column k*slots + s is slot s of BS k
        rows, cols = linear_sum_assignment(expanded)
        idx = np.empty(M, dtype=int)
        idx[rows] = cols // slots
        return Association.from_indices(idx, K)
    if method == "relax_round":
        return Association.from_indices(np.argmax(relaxed_association(cost, Na), axis=1), K)
    raise ValueError(f"unknown association method {method!r}")


def relaxed_association(cost: np.ndarray, max_assoc: int) -> np.ndarray:
    """Continuous LP solution of the association problem, shape (M, K)."""
    M, K = cost.shape
    A_eq = np.kron(np.eye(M), np.ones((1, K)))  # each UAV fully associated
    A_ub = np.kron(np.ones((1, M)), np.eye(K))  # BS capacity
    res = linprog(cost.ravel(), A_ub=A_ub, b_ub=np.full(K, max_assoc), A_eq=A_eq,
                  b_eq=np.ones(M), bounds=(0, 1), method="highs")
    if not res.success:
        raise AssociationInfeasibleError(f"association LP failed: {res.message}")
    return res.x.reshape(M, K)


def association_cost(association: Association, Q_prev, scenario: Scenario) -> float:
    return float(np.sum(association.matrix * association_costs(Q_prev, scenario)))


def comm_optimal_positions(Q_prev, association: Association, scenario: Scenario) -> np.ndarray:
    """Each UAV flies straight at its serving BS, at most V_max * dt, stopping on it."""
    Q_prev = np.asarray(Q_prev, dtype=float)
    target = scenario.bs_array[association.bs_index]
    delta = target - Q_prev
    dist = np.hypot(delta[:, 0], delta[:, 1])
    step = scenario.max_step_m
    out = Q_prev.copy()
    reach = dist <= step
    out[reach] = target[reach]
    far = ~reach
    out[far] = Q_prev[far] + step * delta[far] / dist[far, None]
    return out


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    rate_floor: float  # R_c* in bit/s
    association: Association
    positions: np.ndarray
    shares: np.ndarray


def check_feasibility(Q_prev, scenario: Scenario, method: str = "exact") -> FeasibilityReport:
    association = solve_association(Q_prev, scenario, method)
    Qc = comm_optimal_positions(Q_prev, association, scenario)
    eta, rc = comm_optimal_bandwidth(Qc, association, scenario)
    return FeasibilityReport(rc >= scenario.rate_threshold_bps, rc, association, Qc, eta)


def minimum_shares(Q, association: Association, scenario: Scenario) -> np.ndarray:
    """Smallest share per UAV that still meets R_th at positions Q."""
    return scenario.rate_threshold_bps / serving_rates(Q, association, scenario)
