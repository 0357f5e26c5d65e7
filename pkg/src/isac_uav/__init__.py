"""Multi-UAV integrated sensing and communication target tracking.

UAVs relay data to ground base stations while sensing a moving target; each
interval their positions and bandwidth shares are chosen to minimize the
posterior Cramér-Rao bound of the tracking filter.
"""

from .estimation import (
    BeliefState,
    FisherMatrix,
    SingularInformationError,
    ekf_update,
    measurement_fim,
    pcrb_gradients,
    pcrb_matrix,
    pcrb_trace,
    predict,
)
from .scenario import Scenario, ScenarioError, TargetState, load_scenario, reference_scenario
from .simulator import STRATEGIES, MonteCarloResult, RunSummary, StepRecord, monte_carlo, run_episode

__version__ = "0.1.0"

__all__ = [
    "BeliefState", "FisherMatrix", "MonteCarloResult", "RunSummary", "STRATEGIES", "Scenario",
    "ScenarioError", "SingularInformationError", "StepRecord", "TargetState", "ekf_update",
    "load_scenario", "measurement_fim", "monte_carlo", "reference_scenario", "pcrb_gradients",
    "pcrb_matrix", "pcrb_trace", "predict", "run_episode",
]
