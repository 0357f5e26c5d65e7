"""Closed-loop tracking: predict, plan, sense, update; plus Monte Carlo campaigns.

Strategies differ only in the per-interval decision:

* ``proposed``: joint trajectory and bandwidth optimization of the posterior CRB.
* ``sd``: UAVs stay at their initial positions, only the shares are optimized.
* ``aba``: equal shares, only the trajectories are optimized.
* ``crb``: the proposed pipeline driven by the measurement-only CRB.
"""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .estimation import BeliefState, ekf_update, nees, pcrb_trace, predict
from .optimizer import PcrbObjective, SearchParams, SwarmDecision, plan_interval
from .optimizer.feasibility import comm_optimal_bandwidth, solve_association
from .scenario import (
    STREAM_BELIEF_INIT,
    STREAM_MEASUREMENT,
    STREAM_PROCESS,
    Scenario,
    TargetState,
    rng_stream,
)
from .sensing import TransitionModel, noisy_measurement, sample_process_noise

log = logging.getLogger(__name__)

STRATEGIES = ("proposed", "sd", "aba", "crb")
INITIAL_COVARIANCE = np.diag([100.0, 100.0, 25.0, 25.0])
DEFAULT_WARMUP = 5


def strategy_proposed(belief_pred: BeliefState, Q_prev, eta_prev, scenario: Scenario,
                      params: SearchParams = SearchParams()) -> SwarmDecision:
    return plan_interval(PcrbObjective.posterior(belief_pred, scenario), Q_prev, eta_prev,
                         scenario, params)


def strategy_sd(belief_pred: BeliefState, Q_prev, eta_prev, scenario: Scenario,
                params: SearchParams = SearchParams()) -> SwarmDecision:
    return plan_interval(PcrbObjective.posterior(belief_pred, scenario), Q_prev, eta_prev,
                         scenario, params, move=False)


def strategy_aba(belief_pred: BeliefState, Q_prev, eta_prev, scenario: Scenario,
                 params: SearchParams = SearchParams()) -> SwarmDecision:
    M = scenario.num_uavs
    return plan_interval(PcrbObjective.posterior(belief_pred, scenario), Q_prev, eta_prev,
                         scenario, params, allocate=False, fixed_shares=np.full(M, 1.0 / M))


def strategy_crb(belief_pred: BeliefState, Q_prev, eta_prev, scenario: Scenario,
                 params: SearchParams = SearchParams()) -> SwarmDecision:
    return plan_interval(PcrbObjective.crb(belief_pred, scenario), Q_prev, eta_prev,
                         scenario, params)


_STRATEGY_FUNCS = {
    "proposed": strategy_proposed,
    "sd": strategy_sd,
    "aba": strategy_aba,
    "crb": strategy_crb,
}


def parse_strategies(text: str) -> list[str]:
    names = [s.strip().lower() for s in text.split(",") if s.strip()]
    bad = [n for n in names if n not in STRATEGIES]
    if bad or not names:
        raise ValueError(f"unknown strategy {bad or text!r}; choose from {', '.join(STRATEGIES)}")
    return names


@dataclass(frozen=True)
class NoiseRealization:
    """Standard-normal draws for one run, shared by every strategy of that run."""

    process: np.ndarray  # (N, 4)
    measurement: np.ndarray  # (N, 2M)
    belief_init: np.ndarray  # (4,)

    @classmethod
    def draw(cls, scenario: Scenario, seed: int, run_index: int) -> NoiseRealization:
        N, M = scenario.num_steps, scenario.num_uavs
        return cls(
            process=rng_stream(seed, STREAM_PROCESS, run_index).standard_normal((N, 4)),
            measurement=rng_stream(seed, STREAM_MEASUREMENT, run_index).standard_normal((N, 2 * M)),
            belief_init=rng_stream(seed, STREAM_BELIEF_INIT, run_index).standard_normal(4),
        )

    @classmethod
    def zeros(cls, scenario: Scenario) -> NoiseRealization:
        N, M = scenario.num_steps, scenario.num_uavs
        return cls(np.zeros((N, 4)), np.zeros((N, 2 * M)), np.zeros(4))


@dataclass
class StepRecord:
    n: int
    truth: np.ndarray
    predicted: np.ndarray
    estimate: np.ndarray
    positions: np.ndarray
    shares: np.ndarray
    bs_index: np.ndarray
    pcrb_trace: float
    posterior_trace: float
    rates: np.ndarray
    measurement: np.ndarray
    var_range: np.ndarray
    var_velocity: np.ndarray
    nees: float
    feasible: bool
    fallback: bool
    violations: list[str]
    prior_fim: np.ndarray
    pcrb_position_trace: float
    wall_time_s: float
    diagnostics: dict = field(default_factory=dict, repr=False)

    @property
    def position_error_sq(self) -> float:
        return float(np.sum((self.estimate[:2] - self.truth[:2]) ** 2))

    @property
    def velocity_error_sq(self) -> float:
        return float(np.sum((self.estimate[2:] - self.truth[2:]) ** 2))


@dataclass
class RunSummary:
    strategy: str
    run_index: int
    records: list[StepRecord]
    warmup: int = DEFAULT_WARMUP

    def _window(self):
        return [r for r in self.records if r.n >= self.warmup]

    @property
    def location_rmse(self) -> float:
        return float(np.sqrt(np.mean([r.position_error_sq for r in self._window()])))

    @property
    def velocity_rmse(self) -> float:
        return float(np.sqrt(np.mean([r.velocity_error_sq for r in self._window()])))

    @property
    def mean_pcrb(self) -> float:
        return float(np.mean([r.pcrb_trace for r in self._window()]))

    @property
    def violation_count(self) -> int:
        return sum(len(r.violations) for r in self.records)

    @property
    def fallback_count(self) -> int:
        return sum(r.fallback for r in self.records)

    @property
    def wall_time_per_step(self) -> list[float]:
        return [r.wall_time_s for r in self.records]


def initial_belief(scenario: Scenario, noise: NoiseRealization) -> BeliefState:
    x0 = scenario.target_initial_state.as_array()
    mean = x0 + np.linalg.cholesky(INITIAL_COVARIANCE) @ noise.belief_init
    return BeliefState.from_covariance(mean, INITIAL_COVARIANCE)


def run_episode(scenario: Scenario, strategy: str, noise: NoiseRealization | None = None, *,
                run_index: int = 0, seed: int | None = None,
                params: SearchParams = SearchParams(), warmup: int = DEFAULT_WARMUP,
                noiseless: bool = False, keep_diagnostics: bool = False) -> RunSummary:
    """Simulate the whole horizon for one strategy.

    ``noise`` fixes the random draws; otherwise they come from
    (``seed`` or the scenario seed, ``run_index``). ``noiseless`` removes
    process noise, measurement noise and the initial estimate offset.
    """
    if strategy not in _STRATEGY_FUNCS:
        raise ValueError(f"unknown strategy {strategy!r}")
    decide = _STRATEGY_FUNCS[strategy]
    if noiseless:
        noise = NoiseRealization.zeros(scenario)
    elif noise is None:
        noise = NoiseRealization.draw(scenario, scenario.seed if seed is None else seed, run_index)
    model = TransitionModel.from_scenario(scenario)
    belief = initial_belief(scenario, noise)
    truth = scenario.target_initial_state.as_array()
    Q = scenario.uav_initial_array
    eta = comm_optimal_bandwidth(Q, solve_association(Q, scenario), scenario)[0]
    records = []
    for n in range(1, scenario.num_steps + 1):
        t0 = time.perf_counter()
        belief_pred = predict(belief, model)
        decision = decide(belief_pred, Q, eta, scenario, params)
        Q, eta = decision.positions, decision.shares
        truth = model.F @ truth + sample_process_noise(model, noise.process[n - 1])
        meas = noisy_measurement(truth, Q, eta, scenario, None,
                                 std_normals=noise.measurement[n - 1])
        belief = ekf_update(belief_pred, meas, Q, eta, scenario)
        x_pred = belief_pred.mean_array
        pc = pcrb_trace(belief_pred.prior_fim.J, x_pred, Q, eta, scenario)
        wall = time.perf_counter() - t0
        if decision.violations:
            log.warning("%s n=%d: constraint violations %s", strategy, n,
                        [str(v) for v in decision.violations])
        records.append(StepRecord(
            n=n, truth=truth.copy(), predicted=x_pred, estimate=belief.mean_array,
            positions=Q.copy(), shares=eta.copy(), bs_index=decision.association.bs_index.copy(),
            pcrb_trace=pc, posterior_trace=float(np.trace(belief.covariance)),
            rates=decision.rates, measurement=meas.vector, var_range=meas.var_range,
            var_velocity=meas.var_velocity, nees=nees(truth, belief),
            feasible=decision.feasible, fallback=decision.fallback,
            violations=[str(v) for v in decision.violations],
            prior_fim=belief_pred.prior_fim.J,
            pcrb_position_trace=float(np.trace(belief.covariance[:2, :2])),
            wall_time_s=wall,
            diagnostics=decision.diagnostics if keep_diagnostics else {},
        ))
    return RunSummary(strategy, run_index, records, warmup)


# -- Monte Carlo --------------------------------------------------------------

def _run_all_strategies(args):
    scenario, strategies, seed, run_index, params, warmup, keep = args
    noise = NoiseRealization.draw(scenario, seed, run_index)
    return [run_episode(scenario, s, noise, run_index=run_index, params=params, warmup=warmup,
                        keep_diagnostics=keep) for s in strategies]


@dataclass
class StrategyAggregate:
    strategy: str
    runs: int
    location_rmse: float  # pooled over runs and post-warmup steps
    velocity_rmse: float
    location_rmse_run_mean: float
    location_rmse_run_std: float
    velocity_rmse_run_mean: float
    velocity_rmse_run_std: float
    mean_pcrb: float
    pcrb_by_step: list[float]
    mean_nees: float
    violations: int
    fallbacks: int
    mean_step_seconds: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def aggregate(summaries: list[RunSummary]) -> StrategyAggregate:
    warm = [[r for r in s.records if r.n >= s.warmup] for s in summaries]
    pos = np.array([[r.position_error_sq for r in w] for w in warm])
    vel = np.array([[r.velocity_error_sq for r in w] for w in warm])
    loc_runs = np.array([s.location_rmse for s in summaries])
    vel_runs = np.array([s.velocity_rmse for s in summaries])
    pcrb = np.array([[r.pcrb_trace for r in s.records] for s in summaries])
    return StrategyAggregate(
        strategy=summaries[0].strategy,
        runs=len(summaries),
        location_rmse=float(np.sqrt(pos.mean())),
        velocity_rmse=float(np.sqrt(vel.mean())),
        location_rmse_run_mean=float(loc_runs.mean()),
        location_rmse_run_std=float(loc_runs.std()),
        velocity_rmse_run_mean=float(vel_runs.mean()),
        velocity_rmse_run_std=float(vel_runs.std()),
        mean_pcrb=float(np.mean([s.mean_pcrb for s in summaries])),
        pcrb_by_step=pcrb.mean(axis=0).tolist(),
        mean_nees=float(np.mean([[r.nees for r in w] for w in warm])),
        violations=int(sum(s.violation_count for s in summaries)),
        fallbacks=int(sum(s.fallback_count for s in summaries)),
        mean_step_seconds=float(np.mean([r.wall_time_s for s in summaries for r in s.records])),
    )


@dataclass
class MonteCarloResult:
    runs: dict[str, list[RunSummary]]
    aggregates: dict[str, StrategyAggregate]


def monte_carlo(scenario: Scenario, strategies=STRATEGIES, runs: int = 100,
                seed: int | None = None, params: SearchParams = SearchParams(),
                warmup: int = DEFAULT_WARMUP, workers: int | None = None,
                keep_diagnostics: bool = False, progress=None) -> MonteCarloResult:
    """Paired Monte Carlo: run r of every strategy sees the same noise draws.

    Runs may execute in worker processes; results are reduced in run order.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    strategies = list(strategies)
    seed = scenario.seed if seed is None else seed
    tasks = [(scenario, strategies, seed, r, params, warmup, keep_diagnostics)
             for r in range(runs)]
    workers = workers if workers is not None else min(runs, os.cpu_count() or 1)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_run = []
            for i, res in enumerate(pool.map(_run_all_strategies, tasks)):
                per_run.append(res)
                if progress:
                    progress(i + 1, runs)
    else:
        per_run = []
        for i, t in enumerate(tasks):
            per_run.append(_run_all_strategies(t))
            if progress:
                progress(i + 1, runs)
    by_strategy = {s: [res[j] for res in per_run] for j, s in enumerate(strategies)}
    return MonteCarloResult(by_strategy, {s: aggregate(v) for s, v in by_strategy.items()})


def target_state(record: StepRecord) -> TargetState:
    return TargetState.from_array(record.truth)
