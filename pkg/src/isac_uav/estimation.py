"""EKF recursion and the posterior-CRB objective with its analytic gradients.

Information matrices here mix scales badly (range noise can be ~1e-8 m while
range-rate noise is ~1e-2 m/s). Forming J_S + J_M and inverting it squares the
condition number and can wipe out J_S entirely, so posteriors are computed from
a QR factorization of the stacked square root [L_S^T; R^-1/2 H] instead.
Remaining SPD inverses go through a Jacobi-scaled Cholesky factorization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .scenario import Scenario, TargetState
from .sensing import (
    DegenerateGeometryError,
    MeasurementSet,
    TransitionModel,
    sensing_constant,
    true_measurement,
)

PIVOT_FLOOR = 1e-14


class SingularInformationError(np.linalg.LinAlgError):
    pass


def spd_inverse(A: np.ndarray) -> np.ndarray:
    """Inverse of a (batch of) symmetric positive-definite matrices."""
    A = np.asarray(A, dtype=float)
    A = 0.5 * (A + np.swapaxes(A, -1, -2))
    diag = np.diagonal(A, axis1=-2, axis2=-1)
    if np.any(~(diag > 0)):
        raise SingularInformationError("matrix has a non-positive diagonal entry")
    s = 1.0 / np.sqrt(diag)
    scaled = A * s[..., :, None] * s[..., None, :]
    try:
        L = np.linalg.cholesky(scaled)
    except np.linalg.LinAlgError as exc:
        raise SingularInformationError("matrix is not positive definite") from exc
    piv = np.diagonal(L, axis1=-2, axis2=-1)
    if np.any(piv < np.sqrt(PIVOT_FLOOR)):
        raise SingularInformationError(f"Cholesky pivot below {PIVOT_FLOOR:g}")
    eye = np.broadcast_to(np.eye(A.shape[-1]), A.shape)
    Linv = np.linalg.solve(L, eye)
    inv = np.swapaxes(Linv, -1, -2) @ Linv
    inv = inv * s[..., :, None] * s[..., None, :]
    return 0.5 * (inv + np.swapaxes(inv, -1, -2))


def spd_cholesky(A: np.ndarray) -> np.ndarray:
    """Lower factor L with A = L L^T, with the same checks as spd_inverse."""
    A = np.asarray(A, dtype=float)
    A = 0.5 * (A + np.swapaxes(A, -1, -2))
    diag = np.diagonal(A, axis1=-2, axis2=-1)
    if np.any(~(diag > 0)):
        raise SingularInformationError("matrix has a non-positive diagonal entry")
    root = np.sqrt(diag)
    try:
        L = np.linalg.cholesky(A / root[..., :, None] / root[..., None, :])
    except np.linalg.LinAlgError as exc:
        raise SingularInformationError("matrix is not positive definite") from exc
    if np.any(np.diagonal(L, axis1=-2, axis2=-1) < np.sqrt(PIVOT_FLOOR)):
        raise SingularInformationError(f"Cholesky pivot below {PIVOT_FLOOR:g}")
    return L * root[..., :, None]


@dataclass(frozen=True)
class FisherMatrix:
    """Information matrix J, optionally with the covariance it was built from.

    Inverting an information matrix whose eigenvalues span ~1e16 loses most
    digits of the small-variance directions, so when the exact inverse is
    already known it is carried along and returned by ``inverse``.
    """

    J: np.ndarray
    covariance: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        J = np.asarray(self.J, dtype=float)
        object.__setattr__(self, "J", 0.5 * (J + J.T))
        if self.covariance is not None:
            C = np.asarray(self.covariance, dtype=float)
            object.__setattr__(self, "covariance", 0.5 * (C + C.T))

    @classmethod
    def from_covariance(cls, covariance) -> FisherMatrix:
        return cls(spd_inverse(covariance), covariance)

    def inverse(self) -> np.ndarray:
        return spd_inverse(self.J) if self.covariance is None else self.covariance.copy()

    def trace_inverse(self) -> float:
        return float(np.trace(self.inverse()))


@dataclass(frozen=True)
class BeliefState:
    mean: TargetState
    covariance: np.ndarray
    prior_fim: FisherMatrix

    @classmethod
    def from_covariance(cls, mean, covariance) -> BeliefState:
        cov = np.asarray(covariance, dtype=float)
        return cls(TargetState.from_array(mean), cov, FisherMatrix.from_covariance(cov))

    @property
    def mean_array(self) -> np.ndarray:
        return np.asarray(self.mean, dtype=float)


def predict(belief: BeliefState, model: TransitionModel) -> BeliefState:
    """Propagate mean and covariance; the prior FIM follows its own recursion
    J_S' = (F J_S^-1 F^T + W)^-1."""
    F, W = model.F, model.W
    mean = F @ belief.mean_array
    cov = F @ belief.covariance @ F.T + W
    cov = 0.5 * (cov + cov.T)
    prior_cov = F @ belief.prior_fim.inverse() @ F.T + W
    return BeliefState(TargetState.from_array(mean), cov, FisherMatrix.from_covariance(prior_cov))


# -- measurement information ------------------------------------------------

def information_weights(distance, bandwidth_share, scenario: Scenario):
    """(1/sigma_d^2, 1/sigma_v^2); a zero share simply carries no range information."""
    c = sensing_constant(scenario)
    d4 = np.asarray(distance, dtype=float) ** 4
    eta = np.asarray(bandwidth_share, dtype=float)
    w_d = c * (eta * scenario.total_bandwidth_hz) ** 2 / (scenario.alpha_d * d4)
    w_v = c * scenario.t_meas_s**2 / (scenario.alpha_v * d4)
    return w_d, w_v


def _rows(x_pred: np.ndarray, Q: np.ndarray):
    """Unit LOS u, distance d, range rate v and the range-rate position row t."""
    r = x_pred[:2] - Q
    d = np.sqrt(np.sum(r * r, axis=-1))
    if np.any(d == 0):
        raise DegenerateGeometryError("a UAV coincides with the predicted target position")
    u = r / d[..., None]
    v = np.sum(u * x_pred[2:], axis=-1)
    t = (x_pred[2:] - v[..., None] * u) / d[..., None]
    return u, d, v, t


def measurement_fim(x_pred, uav_positions, bandwidth_shares, scenario: Scenario) -> np.ndarray:
    """J_M = H^T R^-1 H.

    ``uav_positions`` may carry leading batch axes, shape (..., M, 2), with
    ``bandwidth_shares`` broadcastable to (..., M); the result is (..., 4, 4).
    """
    x_pred = np.asarray(x_pred, dtype=float)
    Q = np.asarray(uav_positions, dtype=float)
    if Q.shape[-2] == 0:
        return np.zeros(Q.shape[:-2] + (4, 4))
    u, d, _, t = _rows(x_pred, Q)
    w_d, w_v = information_weights(d, np.broadcast_to(bandwidth_shares, d.shape), scenario)
    J = np.zeros(Q.shape[:-2] + (4, 4))
    J[..., :2, :2] = np.einsum("...m,...mi,...mj->...ij", w_d, u, u)
    gv = np.concatenate([t, u], axis=-1)
    J += np.einsum("...m,...mi,...mj->...ij", w_v, gv, gv)
    return 0.5 * (J + np.swapaxes(J, -1, -2))


def _whitened_jacobian(x_pred, Q, bandwidth_shares, scenario: Scenario) -> np.ndarray:
    """R^-1/2 H, shape (..., 2M, 4); J_M equals its Gram matrix."""
    u, d, _, t = _rows(x_pred, Q)
    w_d, w_v = information_weights(d, np.broadcast_to(bandwidth_shares, d.shape), scenario)
    rows_d = np.concatenate([u, np.zeros_like(u)], axis=-1) * np.sqrt(w_d)[..., None]
    rows_v = np.concatenate([t, u], axis=-1) * np.sqrt(w_v)[..., None]
    return np.concatenate([rows_d, rows_v], axis=-2)


def _posterior_parts(prior_fim, x_pred, Q, bandwidth_shares, scenario: Scenario):
    """C = (J_S + J_M)^-1 and the whitened gain K = C Hw^T, with Hw = R^-1/2 H.

    With J_S = L L^T and [L^T; Hw] = Qf R, C = R^-1 R^-T and K = R^-1 Qh^T,
    Qh the rows of Qf that belong to Hw. Batches like measurement_fim.
    """
    x_pred = np.asarray(x_pred, dtype=float)
    Q = np.asarray(Q, dtype=float)
    L = spd_cholesky(prior_fim)
    if Q.shape[-2] == 0:
        Hw = np.zeros(Q.shape[:-2] + (0, 4))
    else:
        Hw = _whitened_jacobian(x_pred, Q, bandwidth_shares, scenario)
    top = np.broadcast_to(np.swapaxes(L, -1, -2), Hw.shape[:-2] + (4, 4))
    Qf, R = np.linalg.qr(np.concatenate([top, Hw], axis=-2))
    Rinv = np.linalg.solve(R, np.broadcast_to(np.eye(4), R.shape))
    C = Rinv @ np.swapaxes(Rinv, -1, -2)
    K = Rinv @ np.swapaxes(Qf[..., 4:, :], -1, -2)
    return C, K


def pcrb_matrix(prior_fim, x_pred, uav_positions, bandwidth_shares, scenario: Scenario):
    return _posterior_parts(prior_fim, x_pred, uav_positions, bandwidth_shares, scenario)[0]


def pcrb_trace(prior_fim, x_pred, uav_positions, bandwidth_shares, scenario: Scenario):
    """tr((J_S + J_M)^-1), the per-interval objective. Batches like measurement_fim."""
    C = pcrb_matrix(prior_fim, x_pred, uav_positions, bandwidth_shares, scenario)
    out = np.trace(C, axis1=-2, axis2=-1)
    return float(out) if np.ndim(out) == 0 else out


def pcrb_gradients(prior_fim, x_pred, uav_positions, bandwidth_shares, scenario: Scenario):
    """Analytic (df/dQ, df/deta) of f = tr((J_S + J_M)^-1), shapes (M, 2) and (M,).

    Every J_M term is a(r) g(r) g(r)^T with r the target-minus-UAV offset, so
    df/dtheta = -sum_k [da_k |C g_k|^2 + 2 a_k (C g_k)^T C dg_k]. Both pieces
    are written through k_k = sqrt(a_k) C g_k, a column of the whitened gain,
    which stays accurate when a_k is huge.
    """
    x_pred = np.asarray(x_pred, dtype=float)
    Q = np.asarray(uav_positions, dtype=float)
    eta = np.broadcast_to(np.asarray(bandwidth_shares, dtype=float), (len(Q),))
    C, K = _posterior_parts(prior_fim, x_pred, Q, eta, scenario)

    u, d, v, t = _rows(x_pred, Q)
    a_d, a_v = information_weights(d, eta, scenario)
    M = len(Q)
    grad_q = np.zeros((M, 2))
    grad_eta = np.zeros(M)
    eye2 = np.eye(2)
    for m in range(M):
        um, tm, dm, vm = u[m], t[m], d[m], v[m]
        k_d, k_v = K[:, m], K[:, M + m]
        perp = (eye2 - np.outer(um, um)) / dm
        dg_d = np.vstack([perp, np.zeros((2, 2))])
        dt = -(np.outer(um, tm) + np.outer(tm, um) + vm * perp) / dm
        dg_v = np.vstack([dt, perp])
        # df/dq = -df/dr since q enters through r = p - q
        grad_q[m] = (-4.0 * um / dm) * (k_d @ k_d + k_v @ k_v)
        grad_q[m] += 2.0 * np.sqrt(a_d[m]) * (dg_d.T @ (C @ k_d))
        grad_q[m] += 2.0 * np.sqrt(a_v[m]) * (dg_v.T @ (C @ k_v))
        # a_d grows as eta^2, so the share derivative vanishes at eta = 0
        grad_eta[m] = -(2.0 / eta[m]) * (k_d @ k_d) if eta[m] > 0 else 0.0
    return grad_q, grad_eta


# -- EKF ----------------------------------------------------------------------

def ekf_update(belief_pred: BeliefState, meas: MeasurementSet, uav_positions,
               bandwidth_shares, scenario: Scenario) -> BeliefState:
    """EKF measurement update with H and R evaluated at the predicted mean.

    Algebraically the usual S = H P H^T + R, K = P H^T S^-1 update, computed
    through the square-root factorization so it stays accurate when some
    measurement variances are many orders below the prior's.
    """
    x = belief_pred.mean_array
    Q = np.asarray(uav_positions, dtype=float)
    try:
        P_post, K = _posterior_parts(belief_pred.prior_fim.J, x, Q, bandwidth_shares, scenario)
    except SingularInformationError as exc:
        raise SingularInformationError("singular innovation covariance / posterior information") from exc
    _, d, _, _ = _rows(x, Q)
    w_d, w_v = information_weights(d, np.broadcast_to(bandwidth_shares, d.shape), scenario)
    innovation = meas.vector - true_measurement(x, Q)
    mean = x + K @ (np.sqrt(np.concatenate([w_d, w_v])) * innovation)
    J_post = belief_pred.prior_fim.J + measurement_fim(x, Q, bandwidth_shares, scenario)
    return BeliefState(TargetState.from_array(mean), P_post, FisherMatrix(J_post, P_post))


def ekf_update_standard(belief_pred: BeliefState, H: np.ndarray, R: np.ndarray,
                        innovation: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Textbook covariance-form update, used to cross-check the information form."""
    P = belief_pred.covariance
    S = H @ P @ H.T + R
    K = np.linalg.solve(S, H @ P).T
    mean = belief_pred.mean_array + K @ innovation
    cov = (np.eye(len(P)) - K @ H) @ P
    return mean, 0.5 * (cov + cov.T)


def nees(truth, belief: BeliefState) -> float:
    """Normalized estimation error squared of the belief against the true state."""
    e = np.asarray(truth, dtype=float) - belief.mean_array
    return float(e @ belief.prior_fim.J @ e)
