"""Per-interval sensing objective: trace of the (posterior) CRB at the predicted state."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..estimation import BeliefState, pcrb_gradients, pcrb_trace
from ..scenario import Scenario

CRB_REGULARIZATION = 1e-9


@dataclass(frozen=True)
class PcrbObjective:
    """f(Q, eta) = tr((prior + J_M(Q, eta))^-1) at a fixed predicted state.

    With the predicted prior FIM this is the posterior-CRB objective; with a
    tiny ridge in place of the prior it is the measurement-only CRB.
    """

    prior_fim: np.ndarray
    x_pred: np.ndarray
    scenario: Scenario

    @classmethod
    def posterior(cls, belief_pred: BeliefState, scenario: Scenario) -> PcrbObjective:
        return cls(belief_pred.prior_fim.J, belief_pred.mean_array, scenario)

    @classmethod
    def crb(cls, belief_pred: BeliefState, scenario: Scenario,
            ridge: float = CRB_REGULARIZATION) -> PcrbObjective:
        return cls(ridge * np.eye(4), belief_pred.mean_array, scenario)

    @property
    def target_position(self) -> np.ndarray:
        return self.x_pred[:2]

    def value(self, Q, eta):
        return pcrb_trace(self.prior_fim, self.x_pred, Q, eta, self.scenario)

    def gradients(self, Q, eta):
        return pcrb_gradients(self.prior_fim, self.x_pred, Q, eta, self.scenario)
