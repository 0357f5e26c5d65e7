"""Target motion, range / range-rate measurements and echo-SNR-driven noise."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scenario import Scenario, TargetState


class DegenerateGeometryError(ValueError):
    """A UAV sits exactly on the target's horizontal position."""


class ZeroBandwidthError(ValueError):
    pass


@dataclass(frozen=True)
class TransitionModel:
    """Constant-velocity model with white-noise acceleration of intensity kappa.

    State ordering is [x, y, vx, vy].
    """

    F: np.ndarray
    W: np.ndarray

    @classmethod
    def constant_velocity(cls, dt: float, kappa: float) -> TransitionModel:
        F = np.kron(np.array([[1.0, dt], [0.0, 1.0]]), np.eye(2))
        W = kappa * np.kron(np.array([[dt**3 / 3.0, dt**2 / 2.0], [dt**2 / 2.0, dt]]), np.eye(2))
        F.flags.writeable = False
        W.flags.writeable = False
        return cls(F=F, W=W)

    @classmethod
    def from_scenario(cls, scenario: Scenario) -> TransitionModel:
        return cls.constant_velocity(scenario.step_s, scenario.process_noise_intensity)


@dataclass(frozen=True)
class MeasurementSet:
    ranges: np.ndarray
    radial_velocities: np.ndarray
    var_range: np.ndarray
    var_velocity: np.ndarray

    @property
    def vector(self) -> np.ndarray:
        """Stacked (d_1..d_M, v_1..v_M)."""
        return np.concatenate([self.ranges, self.radial_velocities])

    @property
    def covariance(self) -> np.ndarray:
        return np.diag(np.concatenate([self.var_range, self.var_velocity]))


def evolve_state(x, model: TransitionModel, rng: np.random.Generator | None) -> TargetState:
    """One step of x' = F x + w, w ~ N(0, W); ``rng=None`` gives the noiseless step."""
    x = np.asarray(x, dtype=float)
    out = model.F @ x
    if rng is not None:
        out = out + sample_process_noise(model, rng.standard_normal(4))
    return TargetState.from_array(out)


def sample_process_noise(model: TransitionModel, std_normals: np.ndarray) -> np.ndarray:
    # Per-axis blocks are [[dt^3/3, dt^2/2], [dt^2/2, dt]] * kappa; factor them directly
    # so kappa = 0 needs no special case.
    W = model.W
    a, b, c = W[0, 0], W[0, 2], W[2, 2]
    l11 = math.sqrt(a) if a > 0 else 0.0
    l21 = b / l11 if l11 > 0 else 0.0
    l22 = math.sqrt(max(c - l21**2, 0.0))
    z = std_normals
    return np.array([l11 * z[0], l11 * z[1], l21 * z[0] + l22 * z[2], l21 * z[1] + l22 * z[3]])


def _geometry(x, uav_positions):
    x = np.asarray(x, dtype=float)
    q = np.atleast_2d(np.asarray(uav_positions, dtype=float))
    r = x[:2] - q
    d = np.hypot(r[:, 0], r[:, 1])
    if np.any(d == 0):
        raise DegenerateGeometryError(
            f"UAV(s) {np.flatnonzero(d == 0).tolist()} coincide with the target position")
    return x, r, d


def true_measurement(x, uav_positions) -> np.ndarray:
    """Noise-free (d_1..d_M, v_1..v_M) with v the signed range rate."""
    x, r, d = _geometry(x, uav_positions)
    v = (r @ x[2:]) / d
    return np.concatenate([d, v])


def measurement_jacobian(x, uav_positions) -> np.ndarray:
    """d h / d x, shape (2M, 4), rows ordered as the measurement vector."""
    x, r, d = _geometry(x, uav_positions)
    u = r / d[:, None]
    vel = x[2:]
    v = u @ vel
    M = len(d)
    H = np.zeros((2 * M, 4))
    H[:M, :2] = u
    H[M:, :2] = (vel[None, :] - v[:, None] * u) / d[:, None]
    H[M:, 2:] = u
    return H


def sensing_constant(scenario: Scenario) -> float:
    """lambda^2 P_u sigma_RCS / ((4 pi)^3 noise); echo SNR is this over d^4."""
    return (scenario.wavelength_m**2 * scenario.uav_tx_power_w * scenario.rcs_m2
            / ((4.0 * math.pi) ** 3 * scenario.noise_power_w))


def echo_snr(distance, scenario: Scenario):
    d = np.asarray(distance, dtype=float)
    if np.any(d <= 0):
        raise DegenerateGeometryError("echo SNR undefined at zero distance")
    out = sensing_constant(scenario) / d**4
    return float(out) if out.ndim == 0 else out


def measurement_variances(distance, bandwidth_share, scenario: Scenario):
    """(sigma_d^2, sigma_v^2) for the given UAV-target distance(s) and share(s)."""
    eta = np.asarray(bandwidth_share, dtype=float)
    if np.any(eta <= 0):
        raise ZeroBandwidthError("range variance undefined for a zero bandwidth share")
    snr = np.asarray(echo_snr(distance, scenario))
    var_d = scenario.alpha_d / (snr * (eta * scenario.total_bandwidth_hz) ** 2)
    var_v = scenario.alpha_v / (snr * scenario.t_meas_s**2) * np.ones_like(var_d)
    if var_d.ndim == 0:
        return float(var_d), float(var_v)
    return var_d, var_v


def noisy_measurement(x, uav_positions, bandwidth_shares, scenario: Scenario,
                      rng: np.random.Generator | None, noise_scale: float = 1.0,
                      std_normals: np.ndarray | None = None) -> MeasurementSet:
    """Measurement with per-channel Gaussian noise at the true geometry.

    Either ``rng`` or pre-drawn ``std_normals`` (length 2M) supplies the noise;
    pre-drawn normals let several strategies share one noise realization.
    """
    clean = true_measurement(x, uav_positions)
    M = len(clean) // 2
    var_d, var_v = measurement_variances(clean[:M], np.broadcast_to(bandwidth_shares, (M,)),
                                         scenario)
    if std_normals is None:
        std_normals = rng.standard_normal(2 * M) if rng is not None else np.zeros(2 * M)
    sigma = np.sqrt(np.concatenate([var_d, var_v]))
    y = clean + noise_scale * sigma * np.asarray(std_normals, dtype=float)
    return MeasurementSet(ranges=y[:M], radial_velocities=y[M:], var_range=var_d,
                          var_velocity=var_v)
