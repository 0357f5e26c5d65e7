"""Scenario configuration, value types and seeded randomness.

A scenario file is JSON with the units carried in the field names. dB-valued
inputs keep their original value on the record (so a dump/reload round-trip
is exact) and their linear equivalents are computed once at construction.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Any, NamedTuple

import numpy as np

SCHEMA_VERSION = 1

# Comm-literature convention; matches the 7.27e-7 reference gain at 28 GHz.
SPEED_OF_LIGHT = 3.0e8

SEED_ENV_VAR = "ISAC_UAV_SEED"

# Named sub-streams of the master seed.
STREAM_PROCESS = 0
STREAM_MEASUREMENT = 1
STREAM_BS_LAYOUT = 2
STREAM_BELIEF_INIT = 3


class ScenarioError(ValueError):
    """Raised for unreadable scenario files or violated scenario invariants."""


class TargetState(NamedTuple):
    x: float
    y: float
    vx: float
    vy: float

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=float)

    @classmethod
    def from_array(cls, arr) -> TargetState:
        arr = np.asarray(arr, dtype=float)
        if arr.shape != (4,) or not np.all(np.isfinite(arr)):
            raise ValueError(f"target state must be 4 finite values, got {arr!r}")
        return cls(*map(float, arr))


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


def dbm_to_watt(value_dbm: float) -> float:
    return 10.0 ** ((value_dbm - 30.0) / 10.0)


def default_beta0(carrier_freq_hz: float) -> float:
    """Free-space channel power gain at 1 m, (c / (4 pi f_c))^2."""
    if carrier_freq_hz <= 0:
        raise ValueError("carrier frequency must be positive")
    return (SPEED_OF_LIGHT / (4.0 * math.pi * carrier_freq_hz)) ** 2


@dataclass(frozen=True)
class Scenario:
    bs_positions_m: tuple[tuple[float, float], ...]
    uav_initial_positions_m: tuple[tuple[float, float], ...]
    target_initial_state: TargetState
    bs_height_m: float = 15.0
    uav_altitude_m: float = 100.0
    max_assoc: int = 3
    total_bandwidth_hz: float = 20e6
    carrier_freq_hz: float = 28e9
    uav_tx_power_w: float = 0.1
    bs_tx_power_w: float = 1.0
    noise_power_dbm: float = -130.0
    rcs_dbsm: float = -10.0
    snr_threshold_db: float = 11.0
    rate_threshold_bps: float = 10e6
    v_max_mps: float = 25.0
    safety_distance_m: float = 30.0
    process_noise_intensity: float = 0.5
    alpha_d: float = 3.6e-8
    alpha_v: float = 1.4e-9
    horizon_s: float = 60.0
    step_s: float = 1.0
    ref_gain: float | None = None
    meas_duration_s: float | None = None
    seed: int = 0
    name: str = "unnamed"

    # derived, linear units
    noise_power_w: float = field(init=False, repr=False, compare=False)
    rcs_m2: float = field(init=False, repr=False, compare=False)
    snr_threshold: float = field(init=False, repr=False, compare=False)
    beta0: float = field(init=False, repr=False, compare=False)
    wavelength_m: float = field(init=False, repr=False, compare=False)
    delta_h_m: float = field(init=False, repr=False, compare=False)
    t_meas_s: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "bs_positions_m", tuple(tuple(map(float, p)) for p in self.bs_positions_m))
        set_(self, "uav_initial_positions_m",
             tuple(tuple(map(float, p)) for p in self.uav_initial_positions_m))
        if not isinstance(self.target_initial_state, TargetState):
            set_(self, "target_initial_state", TargetState.from_array(self.target_initial_state))
        self._validate()
        set_(self, "noise_power_w", dbm_to_watt(self.noise_power_dbm))
        set_(self, "rcs_m2", db_to_linear(self.rcs_dbsm))
        set_(self, "snr_threshold", db_to_linear(self.snr_threshold_db))
        set_(self, "beta0", self.ref_gain if self.ref_gain is not None
             else default_beta0(self.carrier_freq_hz))
        set_(self, "wavelength_m", SPEED_OF_LIGHT / self.carrier_freq_hz)
        set_(self, "delta_h_m", self.uav_altitude_m - self.bs_height_m)
        set_(self, "t_meas_s", self.meas_duration_s if self.meas_duration_s is not None
             else self.step_s)

    def _validate(self):
        def fail(msg):
            raise ScenarioError(msg)

        for name, pts in (("bs_positions_m", self.bs_positions_m),
                          ("uav_initial_positions_m", self.uav_initial_positions_m)):
            if len(pts) < 1:
                fail(f"{name}: need at least one entry")
            for p in pts:
                if len(p) != 2 or not all(math.isfinite(v) for v in p):
                    fail(f"{name}: entries must be finite 2-vectors, got {p!r}")
        if self.max_assoc < 1:
            fail(f"max_assoc must be >= 1, got {self.max_assoc}")
        if self.max_assoc * self.num_bs < self.num_uavs:
            fail(f"max_assoc * num_bs = {self.max_assoc * self.num_bs} < num_uavs = "
                 f"{self.num_uavs}: association infeasible")
        positive = ("total_bandwidth_hz", "carrier_freq_hz", "uav_tx_power_w", "bs_tx_power_w",
                    "v_max_mps", "safety_distance_m", "alpha_d", "alpha_v", "horizon_s",
                    "step_s", "bs_height_m", "uav_altitude_m")
        for name in positive:
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                fail(f"{name} must be finite and > 0, got {v}")
        for name in ("ref_gain", "meas_duration_s"):
            v = getattr(self, name)
            if v is not None and not (math.isfinite(v) and v > 0):
                fail(f"{name} must be > 0 when given, got {v}")
        for name in ("noise_power_dbm", "rcs_dbsm", "snr_threshold_db"):
            if not math.isfinite(getattr(self, name)):
                fail(f"{name} must be finite")
        if not (self.process_noise_intensity >= 0 and math.isfinite(self.process_noise_intensity)):
            fail(f"process_noise_intensity must be >= 0, got {self.process_noise_intensity}")
        if not (self.rate_threshold_bps >= 0):
            fail(f"rate_threshold_bps must be >= 0, got {self.rate_threshold_bps}")
        if self.uav_altitude_m <= self.bs_height_m:
            fail(f"uav_altitude_m ({self.uav_altitude_m}) must exceed bs_height_m "
                 f"({self.bs_height_m})")
        n = self.horizon_s / self.step_s
        if abs(n - round(n)) > 1e-9:
            fail(f"horizon_s ({self.horizon_s}) must be a multiple of step_s ({self.step_s})")
        q = np.asarray(self.uav_initial_positions_m)
        for i in range(len(q)):
            for j in range(i + 1, len(q)):
                dist = float(np.hypot(*(q[i] - q[j])))
                if dist < self.safety_distance_m:
                    fail(f"uav_initial_positions_m: UAVs {i} and {j} are {dist:.3f} m apart, "
                         f"below safety_distance_m = {self.safety_distance_m}")

    @property
    def num_uavs(self) -> int:
        return len(self.uav_initial_positions_m)

    @property
    def num_bs(self) -> int:
        return len(self.bs_positions_m)

    @property
    def num_steps(self) -> int:
        return int(round(self.horizon_s / self.step_s))

    @property
    def bs_array(self) -> np.ndarray:
        return np.asarray(self.bs_positions_m, dtype=float)

    @property
    def uav_initial_array(self) -> np.ndarray:
        return np.asarray(self.uav_initial_positions_m, dtype=float)

    @property
    def rho0(self) -> float:
        """Reference SNR P_u * beta0 / noise of the UAV uplink."""
        return self.uav_tx_power_w * self.beta0 / self.noise_power_w

    @property
    def max_step_m(self) -> float:
        return self.v_max_mps * self.step_s

    def replace(self, **changes) -> Scenario:
        data = self.to_dict()
        data.update(changes)
        return Scenario.from_dict(data)

    def to_dict(self) -> dict[str, Any]:
        out = {}
        for f in fields(self):
            if not f.init:
                continue
            v = getattr(self, f.name)
            if isinstance(v, TargetState):
                v = list(v)
            elif isinstance(v, tuple):
                v = [list(p) for p in v]
            out[f.name] = v
        out["schema_version"] = SCHEMA_VERSION
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Scenario:
        data = dict(data)
        version = data.pop("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ScenarioError(f"unsupported schema_version {version}")
        known = {f.name for f in fields(cls) if f.init}
        unknown = set(data) - known
        if unknown:
            raise ScenarioError(f"unknown scenario fields: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ScenarioError(str(exc)) from exc
        except ValueError as exc:
            if isinstance(exc, ScenarioError):
                raise
            raise ScenarioError(str(exc)) from exc


def load_scenario(path: str | os.PathLike) -> Scenario:
    """Read and validate a scenario JSON file.

    ``ISAC_UAV_SEED`` in the environment overrides the file's seed.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ScenarioError(f"{path}: top level must be an object")
    env_seed = os.environ.get(SEED_ENV_VAR)
    if env_seed is not None:
        try:
            data["seed"] = int(env_seed)
        except ValueError as exc:
            raise ScenarioError(f"{SEED_ENV_VAR}={env_seed!r} is not an integer") from exc
    return Scenario.from_dict(data)


def dump_scenario(scenario: Scenario, path: str | os.PathLike) -> None:
    Path(path).write_text(json.dumps(scenario.to_dict(), indent=2) + "\n")


def reference_scenario_path() -> Path:
    return Path(str(resources.files("isac_uav") / "data" / "reference.json"))


def reference_scenario() -> Scenario:
    return load_scenario(reference_scenario_path())


def rng_stream(seed: int, stream: int, *extra: int) -> np.random.Generator:
    """Independent generator for (seed, stream, extra...); same key, same draws."""
    return np.random.default_rng([int(seed), int(stream), *map(int, extra)])


def random_bs_layout(num_bs: int, seed: int, region_m: tuple[float, float] = (3000.0, 3000.0),
                     min_separation_m: float = 300.0, max_tries: int = 10_000) -> np.ndarray:
    """Uniform random BS placement in a rectangle with a minimum spacing."""
    rng = rng_stream(seed, STREAM_BS_LAYOUT)
    pts: list[np.ndarray] = []
    for _ in range(max_tries):
        p = rng.uniform((0.0, 0.0), region_m)
        if all(np.hypot(*(p - o)) >= min_separation_m for o in pts):
            pts.append(p)
            if len(pts) == num_bs:
                return np.array(pts)
    raise ScenarioError(f"could not place {num_bs} BSs with spacing {min_separation_m} m")


__all__ = [
    "Scenario", "ScenarioError", "TargetState", "load_scenario", "dump_scenario",
    "default_beta0", "reference_scenario", "reference_scenario_path", "rng_stream",
    "random_bs_layout",
]
