"""Exact (non-surrogate) checks of the per-interval constraints.

Names follow the constraint set of the per-interval problem:
rate, control, share_sum, share_box, bs_capacity, single_bs, binary,
speed, uav_separation, target_separation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..comm import control_radius_dth, full_band_rate
from ..scenario import Scenario
from .feasibility import Association

TOLERANCE = 1e-6


@dataclass(frozen=True)
class Violation:
    constraint: str
    index: tuple
    value: float
    bound: float

    def __str__(self):
        return f"{self.constraint}{list(self.index)}: {self.value:.9g} vs bound {self.bound:.9g}"


def _pairwise_distances(Q):
    diff = Q[..., :, None, :] - Q[..., None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def trajectory_feasible(Q, eta, serving_bs, Q_prev, target_pred, scenario: Scenario,
                        dth: float | None = None, tol: float = TOLERANCE) -> np.ndarray:
    """Boolean mask over the leading axes of Q (shape (..., M, 2)) for the
    position-dependent constraints: rate, control, speed and both separations."""
    Q = np.asarray(Q, dtype=float)
    eta = np.broadcast_to(np.asarray(eta, dtype=float), Q.shape[:-1])
    dth = control_radius_dth(scenario) if dth is None else dth
    ok = np.all(eta * full_band_rate(Q, serving_bs, scenario)
                >= scenario.rate_threshold_bps * (1 - tol), axis=-1)
    bs_dist = np.sqrt(np.sum((Q[..., :, None, :] - scenario.bs_array) ** 2, axis=-1))
    ok &= np.all(bs_dist.min(axis=-1) <= dth * (1 + tol), axis=-1)
    move = np.sqrt(np.sum((Q - Q_prev) ** 2, axis=-1))
    ok &= np.all(move <= scenario.max_step_m * (1 + tol), axis=-1)
    ds = scenario.safety_distance_m * (1 - tol)
    M = Q.shape[-2]
    if M > 1:
        iu = np.triu_indices(M, 1)
        ok &= np.all(_pairwise_distances(Q)[..., iu[0], iu[1]] >= ds, axis=-1)
    tgt = np.sqrt(np.sum((Q - np.asarray(target_pred)[:2]) ** 2, axis=-1))
    ok &= np.all(tgt >= ds, axis=-1)
    return ok


def constraint_violations(Q, eta, association: Association, Q_prev, target_pred,
                          scenario: Scenario, tol: float = TOLERANCE) -> list[Violation]:
    """Every violated constraint of a decision, empty when the decision is valid."""
    Q = np.asarray(Q, dtype=float)
    eta = np.asarray(eta, dtype=float)
    Q_prev = np.asarray(Q_prev, dtype=float)
    out: list[Violation] = []
    a = association.matrix
    M = len(Q)

    if not np.all((a == 0) | (a == 1)):
        out.append(Violation("binary", (), float(np.max(np.abs(a - np.round(a)))), 0.0))
    for k, s in enumerate(a.sum(axis=0)):
        if s > scenario.max_assoc:
            out.append(Violation("bs_capacity", (k,), float(s), scenario.max_assoc))
    for m, s in enumerate(a.sum(axis=1)):
        if s > 1:
            out.append(Violation("single_bs", (m,), float(s), 1.0))

    if abs(eta.sum() - 1.0) > tol:
        out.append(Violation("share_sum", (), float(eta.sum()), 1.0))
    for m in range(M):
        if eta[m] < -tol or eta[m] > 1 + tol:
            out.append(Violation("share_box", (m,), float(eta[m]), 1.0))

    rates = np.zeros(M)
    idx = association.bs_index
    for m in range(M):
        if idx[m] >= 0:
            rates[m] = eta[m] * full_band_rate(Q[m], scenario.bs_array[idx[m]], scenario)
        if rates[m] < scenario.rate_threshold_bps * (1 - tol):
            out.append(Violation("rate", (m,), float(rates[m]), scenario.rate_threshold_bps))

    dth = control_radius_dth(scenario)
    for m in range(M):
        dmin = float(np.min(np.hypot(*(scenario.bs_array - Q[m]).T)))
        if dmin > dth * (1 + tol):
            out.append(Violation("control", (m,), dmin, dth))
        move = float(np.hypot(*(Q[m] - Q_prev[m])))
        if move > scenario.max_step_m * (1 + tol):
            out.append(Violation("speed", (m,), move, scenario.max_step_m))
        tgt = float(np.hypot(*(Q[m] - np.asarray(target_pred)[:2])))
        if tgt < scenario.safety_distance_m * (1 - tol):
            out.append(Violation("target_separation", (m,), tgt, scenario.safety_distance_m))
    for i in range(M):
        for j in range(i + 1, M):
            dist = float(np.hypot(*(Q[i] - Q[j])))
            if dist < scenario.safety_distance_m * (1 - tol):
                out.append(Violation("uav_separation", (i, j), dist, scenario.safety_distance_m))
    return out
