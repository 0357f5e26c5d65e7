import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from isac_uav.estimation import (
    BeliefState,
    FisherMatrix,
    SingularInformationError,
    ekf_update,
    ekf_update_standard,
    measurement_fim,
    nees,
    pcrb_gradients,
    pcrb_matrix,
    pcrb_trace,
    predict,
    spd_inverse,
)
from isac_uav.oracles import _mp_objective, fd_gradients, random_prior
from isac_uav.sensing import (
    MeasurementSet,
    TransitionModel,
    measurement_jacobian,
    measurement_variances,
    true_measurement,
)


def random_spd(rng, n=4, cond=1e3):
    A = rng.normal(size=(n, n))
    U, _ = np.linalg.qr(A)
    return U @ np.diag(np.geomspace(1.0, cond, n)) @ U.T


def random_geometry(rng, M, d_range=(60.0, 1500.0)):
    x = np.array([1500.0, 1500.0, *rng.normal(0, 20, 2)])
    d = rng.uniform(*d_range, M)
    ang = rng.uniform(0, 2 * np.pi, M)
    Q = x[:2] - np.stack([d * np.cos(ang), d * np.sin(ang)], axis=1)
    eta = rng.dirichlet(np.ones(M))
    return x, Q, eta


@pytest.fixture
def model(scenario):
    return TransitionModel.from_scenario(scenario)


# -- SPD inverse -------------------------------------------------------------

def test_spd_inverse_matches_numpy(rng):
    A = random_spd(rng)
    np.testing.assert_allclose(spd_inverse(A), np.linalg.inv(A), rtol=1e-10, atol=1e-14)


def test_spd_inverse_badly_scaled(rng):
    # diagonal scaling spanning 1e16 is harmless after Jacobi scaling
    d = np.array([1e8, 1e8, 1e-8, 1e-8])
    B = random_spd(rng, cond=10)
    expected = np.linalg.inv(B) / np.outer(d, d)
    np.testing.assert_allclose(spd_inverse(B * np.outer(d, d)), expected, rtol=1e-10)


@pytest.mark.parametrize("A", [
    np.diag([1.0, 1.0, 0.0, 1.0]),
    np.diag([1.0, -1.0, 1.0, 1.0]),
    np.array([[1.0, 2.0], [2.0, 1.0]]),
    np.array([[1.0, 1.0 - 1e-16], [1.0 - 1e-16, 1.0]]),
])
def test_spd_inverse_rejects(A):
    with pytest.raises(SingularInformationError):
        spd_inverse(A)


def test_fisher_matrix_from_covariance(rng):
    P = random_spd(rng)
    fm = FisherMatrix.from_covariance(P)
    np.testing.assert_array_equal(fm.inverse(), 0.5 * (P + P.T))
    np.testing.assert_allclose(fm.J @ P, np.eye(4), atol=1e-9)
    assert fm.trace_inverse() == pytest.approx(np.trace(P))


# -- prediction ----------------------------------------------------------------

def test_predict_noiseless_identity_cov():
    model = TransitionModel.constant_velocity(1.0, 0.0)
    b = BeliefState.from_covariance([0, 0, 1, 1], np.eye(4))
    out = predict(b, model)
    np.testing.assert_allclose(out.covariance, model.F @ model.F.T, rtol=1e-15)
    np.testing.assert_allclose(out.mean_array, [1, 1, 1, 1])


def test_predict_prior_fim_two_ways(rng, model):
    P = random_spd(rng)
    J = np.linalg.inv(P)
    b = BeliefState(BeliefState.from_covariance(np.zeros(4), P).mean, P, FisherMatrix(J))
    out = predict(b, model)
    via_recursion = np.linalg.inv(model.F @ np.linalg.inv(J) @ model.F.T + model.W)
    via_covariance = np.linalg.inv(out.covariance)
    np.testing.assert_allclose(out.prior_fim.J, via_recursion, rtol=1e-9)
    np.testing.assert_allclose(out.prior_fim.J, via_covariance, rtol=1e-9)


def test_predict_inflates(rng, model):
    P = random_spd(rng)
    out = predict(BeliefState.from_covariance(np.zeros(4), P), model)
    assert np.trace(out.covariance) >= np.trace(model.F @ P @ model.F.T)


# -- measurement information ---------------------------------------------------

def test_fim_no_uavs(scenario):
    np.testing.assert_array_equal(
        measurement_fim([0, 0, 1, 1], np.zeros((0, 2)), np.zeros(0), scenario), np.zeros((4, 4)))


def test_fim_matches_jacobian_form(scenario, rng):
    x, Q, eta = random_geometry(rng, 3)
    H = measurement_jacobian(x, Q)
    d = np.hypot(*(x[:2] - Q).T)
    var_d, var_v = measurement_variances(d, eta, scenario)
    R_inv = np.diag(1 / np.concatenate([var_d, var_v]))
    np.testing.assert_allclose(measurement_fim(x, Q, eta, scenario), H.T @ R_inv @ H, rtol=1e-10)


def test_fim_psd(scenario, rng):
    for _ in range(100):
        x, Q, eta = random_geometry(rng, rng.integers(1, 5))
        J = measurement_fim(x, Q, eta, scenario)
        np.testing.assert_array_equal(J, J.T)
        scale = np.sqrt(np.diag(J)) + 1e-300
        np.linalg.cholesky(J / np.outer(scale, scale) + 1e-12 * np.eye(4))


def test_fim_variance_scaling(scenario, rng):
    x, Q, eta = random_geometry(rng, 3)
    J = measurement_fim(x, Q, eta, scenario)
    scaled = scenario.replace(alpha_d=3 * scenario.alpha_d, alpha_v=3 * scenario.alpha_v)
    np.testing.assert_allclose(measurement_fim(x, Q, eta, scaled), J / 3, rtol=1e-12)


def test_fim_batches(scenario, rng):
    x, Q, eta = random_geometry(rng, 3)
    batch = np.stack([Q, Q + 10.0, Q - 5.0])
    out = measurement_fim(x, batch, eta, scenario)
    for b in range(3):
        np.testing.assert_allclose(out[b], measurement_fim(x, batch[b], eta, scenario), rtol=1e-14)


# -- PCRB objective ------------------------------------------------------------

def test_pcrb_without_measurements(scenario, rng):
    J = random_spd(rng)
    assert pcrb_trace(J, [0, 0, 1, 1], np.zeros((0, 2)), np.zeros(0), scenario) == pytest.approx(
        np.trace(np.linalg.inv(J)), rel=1e-10)


def test_pcrb_information_monotone(scenario, rng, model):
    for _ in range(100):
        x, Q, eta = random_geometry(rng, rng.integers(1, 4))
        J = random_prior(rng, model)
        assert pcrb_trace(J, x, Q, eta, scenario) <= np.trace(np.linalg.inv(J)) * (1 + 1e-12)


def test_pcrb_mirror_symmetry(scenario):
    x = np.array([1000.0, 1000.0, 0.0, 0.0])
    Q = np.array([[700.0, 700.0], [1300.0, 700.0]])  # mirrored about x = 1000
    C = pcrb_matrix(np.eye(4) * 1e-2, x, Q, [0.5, 0.5], scenario)
    # reflecting x about the mirror line leaves the bound unchanged: C_xy = 0
    assert abs(C[0, 1]) <= 1e-9 * np.sqrt(C[0, 0] * C[1, 1])
    Q = np.array([[700.0, 1000.0], [1000.0, 700.0]])  # mirrored about the line y = x
    C = pcrb_matrix(np.eye(4) * 1e-2, x, Q, [0.5, 0.5], scenario)
    assert C[0, 0] == pytest.approx(C[1, 1], rel=1e-9)
    assert C[2, 2] == pytest.approx(C[3, 3], rel=1e-9)


def test_pcrb_permutation_invariant(scenario, rng, model):
    x, Q, eta = random_geometry(rng, 3)
    J = random_prior(rng, model)
    perm = [2, 0, 1]
    assert pcrb_trace(J, x, Q[perm], eta[perm], scenario) == pytest.approx(
        pcrb_trace(J, x, Q, eta, scenario), rel=1e-12)


def test_pcrb_batch_matches_loop(scenario, rng, model):
    x, Q, eta = random_geometry(rng, 3)
    J = random_prior(rng, model)
    batch = Q + rng.normal(0, 20, (6, 3, 2))
    vals = pcrb_trace(J, x, batch, eta, scenario)
    assert vals.shape == (6,)
    for b in range(6):
        assert vals[b] == pytest.approx(pcrb_trace(J, x, batch[b], eta, scenario), rel=1e-12)


def _mp_value(J, x, Q, eta, sc, dps=60):
    with mp.workdps(dps):
        return float(_mp_objective([[mp.mpf(v) for v in r] for r in J], [mp.mpf(v) for v in x],
                                   [[mp.mpf(v) for v in q] for q in Q], [mp.mpf(v) for v in eta], sc))


@pytest.mark.parametrize("M", [1, 2, 3])
def test_pcrb_matches_high_precision(scenario, model, M):
    # one or two UAVs leave J_M rank deficient with entries ~1e16 above the prior
    rng = np.random.default_rng(100 + M)
    for _ in range(10):
        x, Q, eta = random_geometry(rng, M)
        J = random_prior(rng, model)
        assert pcrb_trace(J, x, Q, eta, scenario) == pytest.approx(
            _mp_value(J, x, Q, eta, scenario), rel=1e-6)


def test_pcrb_singular(scenario):
    with pytest.raises(SingularInformationError):
        pcrb_trace(np.zeros((4, 4)), [0, 0, 1, 1], [[100.0, 0.0]], [1.0], scenario)


# -- gradients -----------------------------------------------------------------

@pytest.mark.parametrize("M", [1, 2, 3])
def test_gradients_match_fd(scenario, model, M):
    rng = np.random.default_rng(200 + M)
    for _ in range(5):
        x, Q, eta = random_geometry(rng, M, (50.0, 2000.0))
        eta = np.clip(eta, 0.05, 0.9)
        J = random_prior(rng, model)
        gq, ge = pcrb_gradients(J, x, Q, eta, scenario)
        fq, fe = fd_gradients(J, x, Q, eta, scenario, dps=60)
        assert np.linalg.norm(gq - fq) <= 1e-4 * np.linalg.norm(fq)
        assert np.linalg.norm(ge - fe) <= 1e-4 * np.linalg.norm(fe)


def test_share_gradient_negative(scenario, rng, model):
    for _ in range(100):
        x, Q, eta = random_geometry(rng, 3)
        _, ge = pcrb_gradients(random_prior(rng, model), x, Q, eta, scenario)
        assert np.all(ge < 0)


def test_share_gradient_zero_share(scenario, rng, model):
    x, Q, _ = random_geometry(rng, 3)
    _, ge = pcrb_gradients(random_prior(rng, model), x, Q, [0.0, 0.5, 0.5], scenario)
    assert ge[0] == 0.0


@given(shift=st.tuples(st.floats(-5000, 5000), st.floats(-5000, 5000)))
def test_translation_invariance(scenario, shift):
    rng = np.random.default_rng(7)
    x, Q, eta = random_geometry(rng, 3)
    J = random_spd(rng) * 1e-2
    s = np.array(shift)
    x2 = x.copy()
    x2[:2] += s
    f1, f2 = pcrb_trace(J, x, Q, eta, scenario), pcrb_trace(J, x2, Q + s, eta, scenario)
    assert f2 == pytest.approx(f1, rel=1e-9)
    g1, _ = pcrb_gradients(J, x, Q, eta, scenario)
    g2, _ = pcrb_gradients(J, x2, Q + s, eta, scenario)
    np.testing.assert_allclose(np.linalg.norm(g2, axis=1), np.linalg.norm(g1, axis=1), rtol=1e-6)


# -- EKF -----------------------------------------------------------------------

def _belief(rng, P=None):
    P = random_spd(rng) if P is None else P
    return BeliefState.from_covariance([1000.0, 1200.0, 10.0, -5.0], P)


def _kalman_oracle(x, P, H, R, y, h_pred):
    S = H @ P @ H.T + R
    K = P @ H.T @ np.linalg.inv(S)
    return x + K @ (y - h_pred), (np.eye(4) - K @ H) @ P


def test_ekf_matches_kalman_oracle(scenario, rng):
    # inflate the noise so the covariance-form oracle is itself well conditioned
    sc = scenario.replace(alpha_d=scenario.alpha_d * 1e14, alpha_v=scenario.alpha_v * 1e3)
    b = _belief(rng, random_spd(rng, cond=10) * 1e-2)
    Q = np.array([[800.0, 900.0], [1300.0, 1500.0], [600.0, 1400.0]])
    eta = np.array([0.2, 0.3, 0.5])
    x = b.mean_array
    y = true_measurement(x + [3.0, -2.0, 0.5, 0.1], Q)
    d = np.hypot(*(x[:2] - Q).T)
    var_d, var_v = measurement_variances(d, eta, sc)
    meas = MeasurementSet(y[:3], y[3:], var_d, var_v)
    out = ekf_update(b, meas, Q, eta, sc)
    H = measurement_jacobian(x, Q)
    R = np.diag(np.concatenate([var_d, var_v]))
    mean, cov = _kalman_oracle(x, b.covariance, H, R, y, true_measurement(x, Q))
    np.testing.assert_allclose(out.mean_array, mean, rtol=1e-9)
    np.testing.assert_allclose(out.covariance, cov, rtol=1e-9, atol=1e-12 * np.abs(cov).max())
    std_mean, std_cov = ekf_update_standard(b, H, R, y - true_measurement(x, Q))
    np.testing.assert_allclose(std_mean, mean, rtol=1e-9)
    np.testing.assert_allclose(std_cov, cov, rtol=1e-9, atol=1e-12 * np.abs(cov).max())
    np.testing.assert_allclose(out.prior_fim.J @ out.covariance, np.eye(4), atol=1e-8)


def test_ekf_uninformative_limit(scenario, rng):
    sc = scenario.replace(alpha_d=1e30, alpha_v=1e30)
    b = _belief(rng)
    Q = np.array([[800.0, 900.0], [1300.0, 1500.0]])
    y = true_measurement(b.mean_array, Q) + 5.0
    meas = MeasurementSet(y[:2], y[2:], np.ones(2), np.ones(2))
    out = ekf_update(b, meas, Q, [0.5, 0.5], sc)
    np.testing.assert_allclose(out.mean_array, b.mean_array, rtol=1e-9)
    np.testing.assert_allclose(out.covariance, b.covariance, rtol=1e-9)


def test_ekf_zero_innovation(scenario, rng):
    b = _belief(rng)
    Q = np.array([[800.0, 900.0], [1300.0, 1500.0], [600.0, 1400.0]])
    y = true_measurement(b.mean_array, Q)
    meas = MeasurementSet(y[:3], y[3:], np.ones(3), np.ones(3))
    out = ekf_update(b, meas, Q, [0.3, 0.3, 0.4], scenario)
    np.testing.assert_allclose(out.mean_array, b.mean_array, rtol=1e-12)
    assert np.trace(out.covariance) < np.trace(b.covariance)


def test_ekf_single_uav_keeps_prior_directions(scenario, rng):
    # one UAV observes range and range rate only; the prior must survive elsewhere
    b = _belief(rng)
    Q = np.array([[800.0, 900.0]])
    y = true_measurement(b.mean_array, Q)
    meas = MeasurementSet(y[:1], y[1:], np.ones(1), np.ones(1))
    out = ekf_update(b, meas, Q, [1.0], scenario)
    assert np.trace(out.covariance) == pytest.approx(
        _mp_value(b.prior_fim.J, b.mean_array, Q, [1.0], scenario), rel=1e-6)


def test_nees(rng):
    P = random_spd(rng)
    b = BeliefState.from_covariance([1, 2, 3, 4], P)
    assert nees([1, 2, 3, 4], b) == 0.0
    e = np.array([0.5, -1.0, 0.2, 0.0])
    assert nees(np.array([1, 2, 3, 4]) + e, b) == pytest.approx(e @ np.linalg.solve(P, e))
