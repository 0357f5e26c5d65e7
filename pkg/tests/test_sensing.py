import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from isac_uav.sensing import (
    DegenerateGeometryError,
    TransitionModel,
    ZeroBandwidthError,
    echo_snr,
    evolve_state,
    measurement_jacobian,
    measurement_variances,
    noisy_measurement,
    sample_process_noise,
    sensing_constant,
    true_measurement,
)


def test_noiseless_cv_step():
    model = TransitionModel.constant_velocity(1.0, 0.0)
    np.testing.assert_array_equal(evolve_state([0, 0, 1, 0], model, None), [1, 0, 1, 0])
    np.testing.assert_array_equal(
        evolve_state([0, 0, 1, 0], model, np.random.default_rng(0)), [1, 0, 1, 0])


def test_process_noise_matrix():
    model = TransitionModel.constant_velocity(1.0, 0.5)
    expected = 0.5 * np.kron([[1 / 3, 1 / 2], [1 / 2, 1]], np.eye(2))
    np.testing.assert_allclose(model.W, expected, rtol=1e-15)
    assert np.linalg.det(model.F) == pytest.approx(1.0)


def test_process_noise_moments(rng):
    model = TransitionModel.constant_velocity(1.0, 0.5)
    z = rng.standard_normal((100_000, 4))
    w = np.array([sample_process_noise(model, zi) for zi in z])
    cov = np.cov(w.T)
    big = np.abs(model.W) > 0
    np.testing.assert_allclose(cov[big], model.W[big], rtol=0.05)
    assert np.all(np.abs(cov[~big]) < 0.01)


@pytest.mark.parametrize("dt, kappa", [(0.1, 3.0), (1.0, 0.5), (2.0, 0.5), (1e-3, 1e-6)])
def test_W_psd(dt, kappa):
    W = TransitionModel.constant_velocity(dt, kappa).W
    np.testing.assert_array_equal(W, W.T)
    np.linalg.cholesky(W)


def test_W_zero_intensity():
    W = TransitionModel.constant_velocity(1.0, 0.0).W
    assert not W.any()
    np.testing.assert_array_equal(sample_process_noise(TransitionModel.constant_velocity(1.0, 0.0),
                                                       np.ones(4)), np.zeros(4))


@pytest.mark.parametrize("x, d, v", [
    ([100, 0, 30, 0], 100.0, 30.0),
    ([0, 100, 30, 0], 100.0, 0.0),
])
def test_true_measurement_axes(x, d, v):
    np.testing.assert_allclose(true_measurement(x, [[0.0, 0.0]]), [d, v], atol=1e-12)


def test_true_measurement_reference_geometry():
    y = true_measurement([600, 1600, 30, 0], [[807, 1100]])
    d = math.sqrt(207**2 + 500**2)
    np.testing.assert_allclose(y, [d, -207 * 30 / d], rtol=1e-14)


def test_measurement_ordering():
    Q = [[0.0, 0.0], [500.0, 0.0], [0.0, 500.0]]
    x = [100.0, 200.0, 3.0, -4.0]
    y = true_measurement(x, Q)
    for m, q in enumerate(Q):
        np.testing.assert_allclose(y[[m, 3 + m]], true_measurement(x, [q]))


def test_degenerate_geometry():
    with pytest.raises(DegenerateGeometryError):
        true_measurement([5, 5, 1, 1], [[5, 5]])
    with pytest.raises(DegenerateGeometryError):
        echo_snr(0.0, None)


def test_echo_snr_independent_formula(scenario):
    lam = 3e8 / 28e9
    snr = lam**2 * 0.1 * 0.1 / ((4 * math.pi) ** 3 * 500.0**4 * 1e-16)
    assert echo_snr(500.0, scenario) == pytest.approx(snr, rel=1e-12)
    assert echo_snr(1000.0, scenario) == pytest.approx(echo_snr(500.0, scenario) / 16, rel=1e-14)
    assert sensing_constant(scenario) == pytest.approx(snr * 500.0**4, rel=1e-12)


def test_measurement_variance_values(scenario):
    d, eta = 400.0, 0.3
    lam = 3e8 / 28e9
    snr = lam**2 * 0.1 * 0.1 / ((4 * math.pi) ** 3 * d**4 * 1e-16)
    var_d, var_v = measurement_variances(d, eta, scenario)
    assert var_d == pytest.approx(3.6e-8 / (snr * (eta * 20e6) ** 2), rel=1e-12)
    assert var_v == pytest.approx(1.4e-9 / (snr * 1.0**2), rel=1e-12)


def test_variance_scalings(scenario):
    vd, vv = measurement_variances(300.0, 0.4, scenario)
    vd2, vv2 = measurement_variances(300.0, 0.2, scenario)
    assert vd2 == pytest.approx(4 * vd, rel=1e-14) and vv2 == vv
    vd3, vv3 = measurement_variances(600.0, 0.4, scenario)
    assert vd3 == pytest.approx(16 * vd, rel=1e-14)
    assert vv3 == pytest.approx(16 * vv, rel=1e-14)
    with pytest.raises(ZeroBandwidthError):
        measurement_variances(300.0, 0.0, scenario)


def test_noisy_measurement_noiseless_limit(scenario):
    x, Q = [600, 1600, 30, 0], [[807, 1100], [1500, 2300]]
    meas = noisy_measurement(x, Q, [0.5, 0.5], scenario, np.random.default_rng(1), noise_scale=0.0)
    np.testing.assert_array_equal(meas.vector, true_measurement(x, Q))


def test_noisy_measurement_moments(scenario, rng):
    x, Q = [600, 1600, 30, 0], [[807, 1100], [1500, 2300]]
    clean = true_measurement(x, Q)
    draws = np.array([noisy_measurement(x, Q, [0.4, 0.6], scenario, rng).vector - clean
                      for _ in range(100_000)])
    meas = noisy_measurement(x, Q, [0.4, 0.6], scenario, rng)
    expected = np.diag(meas.covariance)
    np.testing.assert_allclose(draws.var(axis=0), expected, rtol=0.05)


def test_jacobian_axis_aligned():
    H = measurement_jacobian([100, 0, 5, 7], [[0.0, 0.0]])
    assert H[0, 0] == pytest.approx(1.0) and H[0, 1] == pytest.approx(0.0)
    np.testing.assert_array_equal(H[0, 2:], [0.0, 0.0])


finite = st.floats(-2000, 2000, allow_nan=False)


@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=4), finite, finite,
       st.floats(-40, 40), st.floats(-40, 40))
def test_jacobian_matches_fd(Q, px, py, vx, vy):
    Q = np.array(Q)
    x = np.array([px, py, vx, vy])
    d = np.hypot(*(x[:2] - Q).T)
    if np.any(d < 10):
        return
    H = measurement_jacobian(x, Q)
    scale = np.array([d.min(), d.min(), 10.0, 10.0])
    fd = np.zeros_like(H)
    for k in range(4):
        h = 1e-4 * scale[k]
        e = np.zeros(4)
        e[k] = h
        fd[:, k] = (true_measurement(x + e, Q) - true_measurement(x - e, Q)) / (2 * h)
    np.testing.assert_allclose(H, fd, rtol=1e-6, atol=1e-6 * np.abs(H).max())
    M = len(Q)
    np.testing.assert_allclose(np.hypot(H[:M, 0], H[:M, 1]), 1.0, rtol=1e-12)
    # d v / d vx is the x component of the unit line of sight
    np.testing.assert_allclose(H[M:, 2], (x[0] - Q[:, 0]) / d, rtol=1e-12)
