import json
import math

import numpy as np
import pytest

from isac_uav.scenario import (
    SEED_ENV_VAR,
    SPEED_OF_LIGHT,
    Scenario,
    ScenarioError,
    TargetState,
    default_beta0,
    dump_scenario,
    load_scenario,
    reference_scenario_path,
    random_bs_layout,
    rng_stream,
)


def test_reference_values(scenario):
    assert scenario.total_bandwidth_hz == 20e6
    assert scenario.uav_tx_power_w == 0.1
    assert scenario.noise_power_dbm == -130.0
    assert scenario.noise_power_w == pytest.approx(1e-16, rel=1e-12)
    assert scenario.snr_threshold_db == 11.0
    assert scenario.snr_threshold == pytest.approx(10 ** 1.1, rel=1e-12)
    assert scenario.safety_distance_m == 30.0
    assert scenario.step_s == 1.0 and scenario.horizon_s == 60.0
    assert scenario.num_steps == 60


def test_reference_initial_geometry(scenario):
    np.testing.assert_array_equal(scenario.uav_initial_array,
                                  [[1500, 2300], [807, 1100], [2193, 1100]])
    assert scenario.target_initial_state == TargetState(600.0, 1600.0, 30.0, 0.0)


def test_derived_quantities(scenario):
    assert scenario.wavelength_m == pytest.approx(SPEED_OF_LIGHT / 28e9)
    assert scenario.delta_h_m == 85.0
    assert scenario.rcs_m2 == pytest.approx(0.1, rel=1e-12)
    # T^s defaults to the interval length
    assert scenario.t_meas_s == scenario.step_s


def test_coincident_uavs_rejected(scenario):
    with pytest.raises(ScenarioError, match="safety_distance"):
        scenario.replace(uav_initial_positions_m=[[100.0, 100.0], [100.0, 100.0]])


@pytest.mark.parametrize("field, value, match", [
    ("total_bandwidth_hz", 0.0, "total_bandwidth_hz"),
    ("uav_altitude_m", 10.0, "uav_altitude_m"),
    ("max_assoc", 0, "max_assoc"),
    ("step_s", -1.0, "step_s"),
    ("process_noise_intensity", -0.1, "process_noise_intensity"),
])
def test_invariant_violations_name_the_field(scenario, field, value, match):
    with pytest.raises(ScenarioError, match=match):
        scenario.replace(**{field: value})


def test_association_capacity_invariant(scenario):
    with pytest.raises(ScenarioError, match="association infeasible"):
        scenario.replace(max_assoc=1, bs_positions_m=[[0.0, 0.0], [10.0, 0.0]])


def test_round_trip(tmp_path, scenario):
    path = tmp_path / "s.json"
    dump_scenario(scenario, path)
    again = load_scenario(path)
    assert again == scenario
    assert again.to_dict() == scenario.to_dict()


def test_load_errors(tmp_path):
    with pytest.raises(ScenarioError, match="cannot read"):
        load_scenario(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ScenarioError, match="invalid JSON"):
        load_scenario(bad)
    data = json.loads(reference_scenario_path().read_text())
    data["warp_factor"] = 9
    extra = tmp_path / "extra.json"
    extra.write_text(json.dumps(data))
    with pytest.raises(ScenarioError, match="warp_factor"):
        load_scenario(extra)


def test_seed_env_override(monkeypatch):
    monkeypatch.setenv(SEED_ENV_VAR, "99")
    assert load_scenario(reference_scenario_path()).seed == 99
    monkeypatch.setenv(SEED_ENV_VAR, "abc")
    with pytest.raises(ScenarioError):
        load_scenario(reference_scenario_path())


def test_default_beta0_28ghz():
    # (c / (4 pi f))^2 evaluated by hand: c/f = 0.0107142857 m
    expected = (0.3 / 28 / (4 * math.pi)) ** 2
    assert default_beta0(28e9) == pytest.approx(expected, rel=1e-12)
    assert default_beta0(28e9) == pytest.approx(7.27e-7, rel=2e-3)


def test_default_beta0_identities():
    assert default_beta0(SPEED_OF_LIGHT / (4 * math.pi)) == pytest.approx(1.0, rel=1e-12)
    assert default_beta0(56e9) == pytest.approx(default_beta0(28e9) / 4, rel=1e-12)
    with pytest.raises(ValueError):
        default_beta0(0.0)


def test_ref_gain_override(scenario):
    assert scenario.replace(ref_gain=1e-6).beta0 == 1e-6


def test_rng_stream_reproducible():
    a = rng_stream(7, 1, 3).standard_normal(5)
    b = rng_stream(7, 1, 3).standard_normal(5)
    c = rng_stream(7, 2, 3).standard_normal(5)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_random_bs_layout():
    pts = random_bs_layout(5, seed=3)
    assert pts.shape == (5, 2)
    assert np.all((pts >= 0) & (pts <= 3000))
    d = np.hypot(*(pts[:, None] - pts[None]).transpose(2, 0, 1))
    assert np.all(d[np.triu_indices(5, 1)] >= 300)
    np.testing.assert_array_equal(pts, random_bs_layout(5, seed=3))


def test_target_state_validation():
    with pytest.raises(ValueError):
        TargetState.from_array([1.0, 2.0, np.nan, 0.0])
    with pytest.raises(ValueError):
        TargetState.from_array([1.0, 2.0])


def test_scenario_constructor_direct():
    sc = Scenario(bs_positions_m=[[0, 0]], uav_initial_positions_m=[[10, 0]],
                  target_initial_state=[0, 0, 1, 0])
    assert sc.num_uavs == 1 and sc.num_bs == 1
