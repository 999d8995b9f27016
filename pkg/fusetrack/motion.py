"""
Linear constant-velocity Kalman filter over box state.

State layout is ``(cx, cy, w, h, v_cx, v_cy, v_w, v_h)``; the frame interval is
fixed at one frame. ``KalmanState`` is a value: every operation returns a new
state and never mutates its input.
"""
import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from filterpy.kalman import predict as filter_predict
from filterpy.kalman import update as filter_update

from fusetrack.exceptions import NumericError
from fusetrack.geometry import BBox, iou

logger = logging.getLogger(__name__)

STATE_DIM = 8
MEASUREMENT_DIM = 4
# Floor for w and h so the state always reads out as a valid box
MIN_BOX_SIZE = 1e-3
SYMMETRY_TOLERANCE = 1e-9


@dataclass(frozen=True)
class KalmanConfig:
    """
    Noise and gating parameters of the motion model.

    Attributes:
        process_noise_pos (float): Process noise variance on (cx, cy, w, h).
        process_noise_vel (float): Process noise variance on the velocities.
        measurement_noise (float): Measurement noise variance on (cx, cy, w, h).
        gate_threshold (float): Minimum KF-IoU for a correction to be applied.
            0.0 disables the gate.
        initial_pos_var (float): Initial variance on the position block when a
            state is seeded from a box.
        initial_vel_var (float): Initial variance on the (unobserved) velocities.
    """
    process_noise_pos: float = 1.0
    process_noise_vel: float = 0.01
    measurement_noise: float = 1.0
    gate_threshold: float = 0.0
    initial_pos_var: float = 10.0
    initial_vel_var: float = 1000.0

    def validate(self) -> None:
        """
        Validates the configuration.

        Process noise may be zero (noise-free replay); measurement noise must be
        strictly positive so the innovation covariance stays invertible.

        Raises:
            ValueError: If a variance is negative or not finite, the measurement
                noise is not positive, or the gate is outside [0, 1].
        """
        for name in ("process_noise_pos", "process_noise_vel",
                     "initial_pos_var", "initial_vel_var"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"The '{name}' variance must be finite and >= 0.")
        if not np.isfinite(self.measurement_noise) or self.measurement_noise <= 0:
            raise ValueError("The 'measurement_noise' variance must be finite and > 0.")
        if not 0.0 <= self.gate_threshold <= 1.0:
            raise ValueError("The 'gate_threshold' must lie in [0, 1].")


class KalmanState(NamedTuple):
    """
    Mean and covariance of the box filter.

    Attributes:
        mean (np.ndarray): 8-vector ``(cx, cy, w, h, v_cx, v_cy, v_w, v_h)``.
        covariance (np.ndarray): 8x8 symmetric positive semi-definite matrix.
    """
    mean: np.ndarray
    covariance: np.ndarray

    def validate(self) -> None:
        """
        Checks shape, finiteness, symmetry and the covariance diagonal.

        Raises:
            NumericError: If any invariant is broken.
        """
        if self.mean.shape != (STATE_DIM,) or self.covariance.shape != (STATE_DIM, STATE_DIM):
            raise NumericError(
                f"Kalman state has shapes {self.mean.shape} / {self.covariance.shape}, "
                f"expected ({STATE_DIM},) / ({STATE_DIM}, {STATE_DIM}).")
        if not (np.all(np.isfinite(self.mean)) and np.all(np.isfinite(self.covariance))):
            raise NumericError("Kalman state contains non-finite values.")
        if not np.allclose(self.covariance, self.covariance.T, rtol=0.0, atol=SYMMETRY_TOLERANCE):
            raise NumericError("Kalman covariance is not symmetric.")
        if np.any(np.diag(self.covariance) < 0):
            raise NumericError("Kalman covariance has a negative diagonal entry.")


def _transition_matrix() -> np.ndarray:
    transition = np.eye(STATE_DIM)
    for i in range(MEASUREMENT_DIM):
        transition[i, i + MEASUREMENT_DIM] = 1.0
    return transition


def _process_noise(cfg: KalmanConfig) -> np.ndarray:
    return np.diag([cfg.process_noise_pos] * MEASUREMENT_DIM
                   + [cfg.process_noise_vel] * MEASUREMENT_DIM)


_F = _transition_matrix()
_H = np.eye(MEASUREMENT_DIM, STATE_DIM)


def _finish(mean: np.ndarray, covariance: np.ndarray) -> KalmanState:
    # keep w, h positive and the covariance exactly symmetric
    mean = mean.copy()
    mean[2] = max(mean[2], MIN_BOX_SIZE)
    mean[3] = max(mean[3], MIN_BOX_SIZE)
    covariance = (covariance + covariance.T) / 2.0
    return KalmanState(mean, covariance)


def state_from_box(box: BBox, cfg: KalmanConfig = KalmanConfig()) -> KalmanState:
    """
    Seeds a filter state on a box with zero velocity.

    Args:
        box (BBox): Initial box.
        cfg (KalmanConfig): Supplies the initial position/velocity variances.

    Returns:
        KalmanState: The seeded state.
    """
    box.validate()
    cx, cy = box.center
    mean = np.array([cx, cy, box.w, box.h, 0.0, 0.0, 0.0, 0.0])
    covariance = np.diag([cfg.initial_pos_var] * MEASUREMENT_DIM
                         + [cfg.initial_vel_var] * MEASUREMENT_DIM)
    return KalmanState(mean, covariance)


def box_of(state: KalmanState) -> BBox:
    """Reads the box ``(x, y, w, h)`` out of a state mean."""
    cx, cy, w, h = (float(v) for v in state.mean[:MEASUREMENT_DIM])
    return BBox.from_center(cx, cy, w, h)


def kf_predict(state: KalmanState, cfg: KalmanConfig) -> KalmanState:
    """
    Advances the state by one frame under constant velocity.

    Args:
        state (KalmanState): Current state.
        cfg (KalmanConfig): Noise configuration.

    Returns:
        KalmanState: ``mean' = F mean``, ``cov' = F cov F^T + Q``.

    Raises:
        NumericError: If the state is not finite or otherwise invalid.
    """
    state.validate()
    mean, covariance = filter_predict(state.mean, state.covariance, F=_F, Q=_process_noise(cfg))
    return _finish(mean, covariance)


def kf_iou(state: KalmanState, candidate: BBox) -> float:
    """
    KF-IoU: overlap between the box read out of the state and a candidate box.

    Raises:
        InvalidGeometryError: If the state box or the candidate is degenerate.
    """
    return iou(box_of(state), candidate)


def kf_correct(state: KalmanState, obs: BBox, cfg: KalmanConfig) -> KalmanState:
    """
    Corrects the state against an observed box, with gating.

    When ``kf_iou(state, obs) < cfg.gate_threshold`` the correction is skipped and
    the input state is returned untouched, so only the covariance growth of the
    preceding predict remains.

    Args:
        state (KalmanState): Predicted state.
        obs (BBox): Observed box.
        cfg (KalmanConfig): Noise and gate configuration.

    Returns:
        KalmanState: The posterior state (or the input state when gated out).

    Raises:
        NumericError: If the state is invalid or the innovation covariance is singular.
        InvalidGeometryError: If ``obs`` is degenerate.
    """
    state.validate()
    obs.validate()
    score = kf_iou(state, obs)
    if score < cfg.gate_threshold:
        logger.debug("Correction gated out: KF-IoU %.4f < %.4f", score, cfg.gate_threshold)
        return state

    measurement_noise = np.eye(MEASUREMENT_DIM) * cfg.measurement_noise
    innovation = _H @ state.covariance @ _H.T + measurement_noise
    try:
        np.linalg.cholesky(innovation)
    except np.linalg.LinAlgError as exc:
        raise NumericError("Innovation covariance is singular or not positive definite.") from exc

    cx, cy = obs.center
    measurement = np.array([cx, cy, obs.w, obs.h])
    mean, covariance = filter_update(state.mean, state.covariance, measurement,
                                     measurement_noise, _H)
    return _finish(mean, covariance)
