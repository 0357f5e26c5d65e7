"""UAV-BS link budget: LoS channel gain, FDMA uplink rate, control-link SNR."""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .scenario import Scenario


class CoverageError(ValueError):
    """No horizontal distance satisfies the control-link SNR threshold."""


class LinkBudget(NamedTuple):
    gain: float
    spectral_efficiency: float  # bit/s/Hz with the full band
    control_snr: float


def channel_gain(uav_pos, bs_pos, scenario: Scenario):
    """beta0 / (horizontal distance^2 + altitude difference^2).

    Broadcasts over leading dimensions of ``uav_pos`` / ``bs_pos``.
    """
    diff = np.asarray(uav_pos, dtype=float) - np.asarray(bs_pos, dtype=float)
    return scenario.beta0 / (np.sum(diff**2, axis=-1) + scenario.delta_h_m**2)


def full_band_rate(uav_pos, bs_pos, scenario: Scenario):
    """Rate with the whole band, B log2(1 + P_u h / noise)."""
    snr = scenario.uav_tx_power_w * channel_gain(uav_pos, bs_pos, scenario) / scenario.noise_power_w
    return scenario.total_bandwidth_hz * np.log2(1.0 + snr)


def rate(uav_pos, bs_index: int, bandwidth_share: float, scenario: Scenario) -> float:
    if not 0.0 <= bandwidth_share <= 1.0:
        raise ValueError(f"bandwidth share must lie in [0, 1], got {bandwidth_share}")
    bs = scenario.bs_array[bs_index]
    return float(bandwidth_share * full_band_rate(uav_pos, bs, scenario))


def control_snr(uav_pos, bs_pos, scenario: Scenario):
    return scenario.bs_tx_power_w * channel_gain(uav_pos, bs_pos, scenario) / scenario.noise_power_w


def link_budget(uav_pos, bs_pos, scenario: Scenario) -> LinkBudget:
    h = float(channel_gain(uav_pos, bs_pos, scenario))
    return LinkBudget(
        gain=h,
        spectral_efficiency=math.log2(1.0 + scenario.uav_tx_power_w * h / scenario.noise_power_w),
        control_snr=scenario.bs_tx_power_w * h / scenario.noise_power_w,
    )


def control_radius_dth(scenario: Scenario) -> float:
    """Largest horizontal UAV-BS distance meeting the control SNR threshold."""
    reach = scenario.bs_tx_power_w * scenario.beta0 / (scenario.noise_power_w * scenario.snr_threshold)
    excess = reach - scenario.delta_h_m**2
    if excess <= 0:
        raise CoverageError(
            f"control SNR threshold {scenario.snr_threshold_db} dB unreachable even directly "
            f"above a BS (P*beta0/(noise*Gamma) = {reach:.6g} <= dH^2 = {scenario.delta_h_m**2:.6g})")
    return math.sqrt(excess)


def rate_ball_radius_sq(bandwidth_share, scenario: Scenario):
    """Squared horizontal radius around the serving BS inside which the rate meets R_th.

    Negative values mean the threshold is unreachable with that share.
    """
    eta = np.asarray(bandwidth_share, dtype=float)
    if scenario.rate_threshold_bps == 0:
        return np.full(eta.shape, np.inf)
    with np.errstate(divide="ignore", over="ignore"):
        exponent = scenario.rate_threshold_bps / (eta * scenario.total_bandwidth_hz)
        denom = np.expm1(exponent * math.log(2.0))
        out = scenario.rho0 / denom - scenario.delta_h_m**2
    return np.where(eta <= 0, -np.inf, out)
