"""
Test kf_predict and state_from_box functions
from motion.py file
"""
import numpy as np
import pytest

from fusetrack.exceptions import NumericError
from fusetrack.geometry import BBox
from fusetrack.motion import KalmanConfig, KalmanState, box_of, kf_predict, state_from_box


@pytest.fixture
def moving_state():
    """A 20 x 10 box centered on (100, 50) moving by (+2, -1) per frame"""
    mean = np.array([100.0, 50.0, 20.0, 10.0, 2.0, -1.0, 0.0, 0.0])
    return KalmanState(mean, np.eye(8))


def test_state_from_box():
    """Seeded state sits on the box with zero velocity"""
    cfg = KalmanConfig(initial_pos_var=4.0, initial_vel_var=100.0)
    state = state_from_box(BBox(90, 45, 20, 10), cfg)
    assert state.mean.tolist() == [100.0, 50.0, 20.0, 10.0, 0.0, 0.0, 0.0, 0.0]
    assert np.diag(state.covariance).tolist() == [4.0] * 4 + [100.0] * 4
    assert box_of(state) == BBox(90, 45, 20, 10)


# pylint: disable=W0621
def test_constant_velocity(moving_state):
    """The mean advances by its velocity"""
    predicted = kf_predict(moving_state, KalmanConfig())
    assert predicted.mean[:4].tolist() == [102.0, 49.0, 20.0, 10.0]
    assert predicted.mean[4:].tolist() == [2.0, -1.0, 0.0, 0.0]


def test_covariance_grows(moving_state):
    """Prediction adds uncertainty and keeps the covariance symmetric"""
    predicted = kf_predict(moving_state, KalmanConfig())
    assert np.trace(predicted.covariance) > np.trace(moving_state.covariance)
    np.testing.assert_array_equal(predicted.covariance, predicted.covariance.T)


def test_input_not_mutated(moving_state):
    """States are values"""
    before_mean = moving_state.mean.copy()
    before_cov = moving_state.covariance.copy()
    kf_predict(moving_state, KalmanConfig())
    np.testing.assert_array_equal(moving_state.mean, before_mean)
    np.testing.assert_array_equal(moving_state.covariance, before_cov)


def test_zero_process_noise_is_allowed(moving_state):
    """Noise-free replay only propagates the covariance"""
    cfg = KalmanConfig(process_noise_pos=0.0, process_noise_vel=0.0)
    cfg.validate()
    predicted = kf_predict(moving_state, cfg)
    assert predicted.covariance[0, 0] == pytest.approx(2.0)


def test_size_is_floored():
    """Shrinking velocity never produces a non-positive size"""
    mean = np.array([10.0, 10.0, 1.0, 1.0, 0.0, 0.0, -5.0, -5.0])
    predicted = kf_predict(KalmanState(mean, np.eye(8)), KalmanConfig())
    assert predicted.mean[2] > 0 and predicted.mean[3] > 0
    box_of(predicted).validate()


def test_non_finite_state_raises(moving_state):
    """NaN in the mean is a numeric error"""
    mean = moving_state.mean.copy()
    mean[0] = np.nan
    with pytest.raises(NumericError, match="non-finite"):
        kf_predict(KalmanState(mean, moving_state.covariance), KalmanConfig())


def test_asymmetric_covariance_raises(moving_state):
    """The covariance must be symmetric"""
    covariance = np.eye(8)
    covariance[0, 1] = 1.0
    with pytest.raises(NumericError, match="symmetric"):
        kf_predict(KalmanState(moving_state.mean, covariance), KalmanConfig())


@pytest.mark.parametrize("kwargs, name", [
    ({"process_noise_pos": -1.0}, "process_noise_pos"),
    ({"measurement_noise": 0.0}, "measurement_noise"),
    ({"gate_threshold": 1.5}, "gate_threshold"),
])
def test_config_validation(kwargs, name):
    """Invalid noise or gate values are rejected"""
    with pytest.raises(ValueError, match=name):
        KalmanConfig(**kwargs).validate()
