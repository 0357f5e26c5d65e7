"""Brute-force oracle suites for the optimizer and the PCRB machinery.

Each suite draws random instances from a seeded generator, compares the
library against an independent brute-force computation and returns an
``OracleReport``. The suites back both ``isac-uav oracle`` and the test suite.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import mpmath as mp
import numpy as np

from .comm import full_band_rate
from .estimation import pcrb_gradients
from .optimizer import PcrbObjective, SearchParams, plan_interval
from .optimizer.constraints import trajectory_feasible
from .optimizer.feasibility import (
    Association,
    association_cost,
    comm_optimal_bandwidth,
    serving_rates,
    solve_association,
)
from .scenario import SPEED_OF_LIGHT, Scenario, reference_scenario
from .sensing import TransitionModel

ORACLE_SEED = 20240611


@dataclass
class OracleReport:
    name: str
    trials: int
    passes: int
    required: int
    worst: float  # worst measured gap, suite-specific units
    details: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.passes >= self.required

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status} {self.name}: {self.passes}/{self.trials} "
                f"(need {self.required}), worst gap {self.worst:.3e}")


def _random_positions(rng, n, sep, region=3000.0):
    while True:
        pts = rng.uniform(0.0, region, size=(n, 2))
        if n < 2 or min(np.hypot(*(a - b)) for a, b in itertools.combinations(pts, 2)) >= sep:
            return pts


# -- max-min shares ---------------------------------------------------------

def max_min_grid(full_rates: np.ndarray, resolution: float = 1e-3):
    """Grid search of the simplex for the largest minimum rate, M in {2, 3}."""
    M = len(full_rates)
    steps = int(round(1.0 / resolution))
    g = np.arange(steps + 1) * resolution
    if M == 2:
        eta = np.stack([g, 1.0 - g], axis=1)
    elif M == 3:
        e1, e2 = np.meshgrid(g, g, indexing="ij")
        keep = e1 + e2 <= 1.0 + 1e-12
        eta = np.stack([e1[keep], e2[keep], np.clip(1.0 - e1[keep] - e2[keep], 0, 1)], axis=1)
    else:
        raise ValueError("grid oracle supports M = 2 or 3")
    min_rate = np.min(eta * full_rates, axis=1)
    best = int(np.argmax(min_rate))
    return eta[best], float(min_rate[best])


def maxmin_suite(instances: int = 100, seed: int = ORACLE_SEED,
                 resolution: float = 1e-3) -> OracleReport:
    base = reference_scenario()
    rng = np.random.default_rng([seed, 1])
    passes, worst, details = 0, 0.0, []
    for i in range(instances):
        M = 2 if i % 2 == 0 else 3
        Q = _random_positions(rng, M, base.safety_distance_m)
        sc = base.replace(uav_initial_positions_m=Q.tolist())
        assoc = solve_association(Q, sc)
        eta, rc = comm_optimal_bandwidth(Q, assoc, sc)
        full = serving_rates(Q, assoc, sc)
        rates = eta * full
        equal_gap = float(np.max(np.abs(rates - rc)) / rc)
        eta_grid, grid_min = max_min_grid(full, resolution)
        eta_gap = float(np.max(np.abs(eta - eta_grid)))
        ok = (equal_gap < 1e-9 and eta_gap <= (M - 1) * resolution + 1e-12
              and rates.min() >= grid_min * (1 - 1e-12))
        worst = max(worst, eta_gap)
        passes += ok
        if not ok:
            details.append(f"instance {i}: M={M} eta gap {eta_gap:.3g}, equal-rate gap "
                           f"{equal_gap:.3g}, min rate {rates.min():.6g} vs grid {grid_min:.6g}")
    return OracleReport("maxmin_grid", instances, passes, instances, worst, details)


# -- association ----------------------------------------------------------------

def exhaustive_association(cost: np.ndarray, max_assoc: int):
    """Minimum-cost association by enumeration; every UAV served by one BS."""
    M, K = cost.shape
    best, best_idx = np.inf, None
    for idx in itertools.product(range(K), repeat=M):
        if max(np.bincount(idx, minlength=K)) > max_assoc:
            continue
        c = float(cost[np.arange(M), idx].sum())
        if c < best:
            best, best_idx = c, idx
    return best, np.array(best_idx)


def association_suite(instances: int = 100, seed: int = ORACLE_SEED,
                      relax_required: int = 95) -> tuple[OracleReport, OracleReport]:
    base = reference_scenario()
    rng = np.random.default_rng([seed, 2])
    exact_pass = relax_pass = 0
    exact_worst = relax_worst = 0.0
    exact_details, relax_details = [], []
    for i in range(instances):
        while True:
            M = int(rng.integers(1, 5))
            K = int(rng.integers(1, 6))
            Na = int(rng.integers(1, 4))
            if Na * K >= M:
                break
        bs = rng.uniform(0.0, 3000.0, size=(K, 2))
        Q = _random_positions(rng, M, base.safety_distance_m)
        sc = base.replace(bs_positions_m=bs.tolist(), uav_initial_positions_m=Q.tolist(),
                          max_assoc=Na)
        cost = 1.0 / full_band_rate(Q[:, None, :], bs[None, :, :], sc)
        best, _ = exhaustive_association(cost, Na)
        for method in ("exact", "relax_round"):
            a = solve_association(Q, sc, method)
            c = association_cost(a, Q, sc)
            valid = a.is_valid(Na) and np.all(a.matrix.sum(axis=1) == 1)
            gap = (c - best) / best if valid else np.inf
            ok = valid and gap <= 1e-12
            if method == "exact":
                exact_pass += ok
                exact_worst = max(exact_worst, gap)
                if not ok:
                    exact_details.append(f"instance {i}: M={M} K={K} Na={Na} gap {gap:.3g}")
            else:
                relax_pass += ok
                relax_worst = max(relax_worst, gap)
                if not ok:
                    relax_details.append(f"instance {i}: M={M} K={K} Na={Na} "
                                         f"{'gap %.3g' % gap if valid else 'capacity violated'}")
    return (OracleReport("association_exact", instances, exact_pass, instances, exact_worst,
                         exact_details),
            OracleReport("association_relax_round", instances, relax_pass, relax_required,
                         relax_worst, relax_details))


# -- gradients ------------------------------------------------------------------

def _mp_objective(prior, x, Q, eta, sc: Scenario):
    """tr((J_S + H^T R^-1 H)^-1) transcribed independently in mpmath."""
    lam = mp.mpf(SPEED_OF_LIGHT) / mp.mpf(sc.carrier_freq_hz)
    snr_num = lam**2 * mp.mpf(sc.uav_tx_power_w) * mp.mpf(sc.rcs_m2)
    snr_den = (4 * mp.pi) ** 3 * mp.mpf(sc.noise_power_w)
    J = mp.matrix(prior)
    px, py, vx, vy = x
    for (qx, qy), e in zip(Q, eta):
        dx, dy = px - qx, py - qy
        d = mp.sqrt(dx**2 + dy**2)
        snr = snr_num / (snr_den * d**4)
        var_d = mp.mpf(sc.alpha_d) / (snr * (e * mp.mpf(sc.total_bandwidth_hz)) ** 2)
        var_v = mp.mpf(sc.alpha_v) / (snr * mp.mpf(sc.t_meas_s) ** 2)
        v = (dx * vx + dy * vy) / d
        h_d = [dx / d, dy / d, 0, 0]
        h_v = [(vx - v * dx / d) / d, (vy - v * dy / d) / d, dx / d, dy / d]
        for i in range(4):
            for j in range(4):
                J[i, j] += h_d[i] * h_d[j] / var_d + h_v[i] * h_v[j] / var_v
    C = J**-1
    return sum(C[i, i] for i in range(4))


def fd_gradients(prior, x_pred, Q, eta, sc: Scenario, rel_step: float = 1e-5, dps: int = 40):
    """Central finite differences of the mpmath objective."""
    with mp.workdps(dps):
        prior_mp = [[mp.mpf(v) for v in row] for row in np.asarray(prior)]
        x = [mp.mpf(v) for v in x_pred]
        Qm = [[mp.mpf(v) for v in q] for q in Q]
        em = [mp.mpf(v) for v in eta]
        d = np.hypot(*(np.asarray(Q) - np.asarray(x_pred)[:2]).T)
        gq = np.zeros((len(Q), 2))
        ge = np.zeros(len(Q))
        for m in range(len(Q)):
            h = mp.mpf(rel_step * d[m])
            for k in range(2):
                Qp = [row[:] for row in Qm]
                Qn = [row[:] for row in Qm]
                Qp[m][k] += h
                Qn[m][k] -= h
                diff = _mp_objective(prior_mp, x, Qp, em, sc) - _mp_objective(prior_mp, x, Qn, em, sc)
                gq[m, k] = float(diff / (2 * h))
            h = mp.mpf(rel_step * eta[m])
            ep, en = em[:], em[:]
            ep[m] += h
            en[m] -= h
            diff = _mp_objective(prior_mp, x, Qm, ep, sc) - _mp_objective(prior_mp, x, Qm, en, sc)
            ge[m] = float(diff / (2 * h))
    return gq, ge


def random_prior(rng, model: TransitionModel) -> np.ndarray:
    """Predicted prior FIM (F P F^T + W)^-1 for a random SPD P."""
    A = rng.normal(size=(4, 4))
    P = A @ A.T + np.diag(rng.uniform(0.1, 10.0, 4))
    return np.linalg.inv(model.F @ P @ model.F.T + model.W)


def random_gradient_instance(rng, sc: Scenario, d_range=(50.0, 2000.0), eta_range=(0.05, 0.9)):
    M = sc.num_uavs
    x = np.concatenate([rng.uniform(500.0, 2500.0, 2), rng.normal(0.0, 20.0, 2)])
    ang = rng.uniform(0.0, 2 * np.pi, M)
    d = rng.uniform(*d_range, M)
    Q = x[:2] + d[:, None] * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    eta = rng.uniform(*eta_range, M)
    return random_prior(rng, TransitionModel.from_scenario(sc)), x, Q, eta


def gradient_suite(instances: int = 100, seed: int = ORACLE_SEED,
                   tolerance: float = 1e-4) -> OracleReport:
    """Norm-wise relative error of each gradient block against mpmath FD."""
    sc = reference_scenario()
    rng = np.random.default_rng([seed, 3])
    passes, worst, details = 0, 0.0, []
    for i in range(instances):
        prior, x, Q, eta = random_gradient_instance(rng, sc)
        gq, ge = pcrb_gradients(prior, x, Q, eta, sc)
        fq, fe = fd_gradients(prior, x, Q, eta, sc)
        err_q = np.max(np.abs(gq - fq)) / np.max(np.abs(fq))
        err_e = np.max(np.abs(ge - fe)) / np.max(np.abs(fe))
        err = float(max(err_q, err_e))
        worst = max(worst, err)
        ok = err < tolerance
        passes += ok
        if not ok:
            details.append(f"instance {i}: rel err q {err_q:.3g}, eta {err_e:.3g}")
    return OracleReport("gradient_fd", instances, passes, instances, worst, details)


# -- single-UAV optimizer vs spatial grid ------------------------------------------

def single_uav_instance(rng, base: Scenario):
    """One UAV, a predicted target 60-400 m away and a random prior."""
    q = rng.uniform(800.0, 2200.0, 2)
    sc = base.replace(uav_initial_positions_m=[q.tolist()])
    ang = rng.uniform(0.0, 2 * np.pi)
    dist = rng.uniform(60.0, 400.0)
    x = np.concatenate([q + dist * np.array([np.cos(ang), np.sin(ang)]),
                        rng.normal(0.0, 20.0, 2)])
    prior = random_prior(rng, TransitionModel.from_scenario(sc))
    return sc, PcrbObjective(prior, x, sc), q[None, :]


def grid_optimum(objective: PcrbObjective, Q_prev, sc: Scenario, assoc: Association,
                 resolution: float = 5.0):
    """Best PCRB over a square grid clipped to the exact feasible disk (eta = 1)."""
    r = sc.max_step_m
    g = np.arange(-r, r + 1e-9, resolution)
    off = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1).reshape(-1, 2)
    cands = Q_prev[0] + off
    eta = np.ones(1)
    ok = trajectory_feasible(cands[:, None, :], eta, sc.bs_array[assoc.bs_index], Q_prev,
                             objective.target_position, sc)
    vals = objective.value(cands[ok][:, None, :], eta)
    best = int(np.argmin(vals))
    return cands[ok][best], float(vals[best])


def ao_grid_suite(instances: int = 20, seed: int = ORACLE_SEED, tolerance: float = 0.02,
                  params: SearchParams = SearchParams()) -> OracleReport:
    base = reference_scenario()
    rng = np.random.default_rng([seed, 4])
    passes, worst, details = 0, -np.inf, []
    for i in range(instances):
        sc, objective, Q_prev = single_uav_instance(rng, base)
        decision = plan_interval(objective, Q_prev, np.ones(1), sc, params)
        _, grid_best = grid_optimum(objective, Q_prev, sc, decision.association)
        gap = decision.objective_value / grid_best - 1.0
        worst = max(worst, gap)
        ok = gap <= tolerance and decision.feasible
        passes += ok
        if not ok:
            details.append(f"instance {i}: AO {decision.objective_value:.6g} vs grid "
                           f"{grid_best:.6g} (gap {gap:.3%}), feasible={decision.feasible}")
    return OracleReport("ao_vs_grid", instances, passes, instances, float(worst), details)


# -- monotone objective sequences --------------------------------------------------

MONOTONE_RTOL = 1e-12  # batched and single evaluations of one point may differ in the last bits


def random_interval_instance(rng, base: Scenario, num_uavs: int = 3):
    """A predicted target, a random prior and UAVs 80-800 m from the target."""
    x = np.concatenate([rng.uniform(800.0, 2200.0, 2), rng.normal(0.0, 20.0, 2)])
    while True:
        d = rng.uniform(80.0, 800.0, num_uavs)
        ang = rng.uniform(0.0, 2 * np.pi, num_uavs)
        Q = x[:2] + d[:, None] * np.stack([np.cos(ang), np.sin(ang)], axis=1)
        if num_uavs < 2 or min(np.hypot(*(a - b)) for a, b in
                               itertools.combinations(Q, 2)) >= base.safety_distance_m:
            break
    sc = base.replace(uav_initial_positions_m=Q.tolist())
    prior = random_prior(rng, TransitionModel.from_scenario(sc))
    eta = comm_optimal_bandwidth(Q, solve_association(Q, sc), sc)[0]
    return sc, PcrbObjective(prior, x, sc), Q, eta


def _non_increasing(seq) -> bool:
    seq = np.asarray(seq, dtype=float)
    return bool(np.all(seq[1:] <= seq[:-1] + MONOTONE_RTOL * np.abs(seq[:-1])))


def monotonicity_suite(instances: int = 50, seed: int = ORACLE_SEED,
                       params: SearchParams = SearchParams()) -> OracleReport:
    """AO objective sequences and every inner search sequence are non-increasing."""
    base = reference_scenario()
    rng = np.random.default_rng([seed, 5])
    passes, worst, details = 0, 0.0, []
    for i in range(instances):
        sc, objective, Q_prev, eta_prev = random_interval_instance(rng, base)
        decision = plan_interval(objective, Q_prev, eta_prev, sc, params)
        diag = decision.diagnostics
        seqs = [diag.get("ao_objective", [])]
        seqs += [t["objective"] for t in diag.get("trajectory_searches", [])]
        seqs += [t["objective"] for t in diag.get("bandwidth_searches", [])]
        rises = [float(np.max(np.diff(s) / np.asarray(s[:-1]))) for s in seqs if len(s) > 1]
        worst = max([worst, *rises])
        ok = all(_non_increasing(s) for s in seqs) and not decision.fallback
        passes += ok
        if not ok:
            details.append(f"instance {i}: fallback={decision.fallback}, "
                           f"largest relative rise {max(rises, default=0.0):.3g}")
    return OracleReport("monotonicity", instances, passes, instances, worst, details)


SUITES = ("maxmin", "association", "gradient", "ao_grid", "monotonicity")


def run_suite(name: str) -> list[OracleReport]:
    if name == "maxmin":
        return [maxmin_suite()]
    if name == "association":
        return list(association_suite())
    if name == "gradient":
        return [gradient_suite()]
    if name == "ao_grid":
        return [ao_grid_suite()]
    if name == "monotonicity":
        return [monotonicity_suite()]
    if name == "all":
        return [r for s in SUITES for r in run_suite(s)]
    raise ValueError(f"unknown oracle suite {name!r}; choose from {', '.join(SUITES)} or all")
