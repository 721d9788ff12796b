"""Constant-velocity Kalman filter over [xc, yc, w, h, vx, vy, vw, vh].

One predict step spans half a detection interval. The observation can be the
box alone (4-D) or the box plus a visual-tracking displacement (6-D).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from .core import BBox

MIN_SIZE = 1.0

_F = np.eye(8)
for _i in range(4):
    _F[_i, _i + 4] = 1.0
_F.setflags(write=False)

_H6 = np.eye(6, 8)
_H6.setflags(write=False)
_H4 = np.eye(4, 8)
_H4.setflags(write=False)


class DegenerateCovarianceError(ArithmeticError):
    """Innovation covariance is singular; R and P are inconsistent."""


@dataclass(frozen=True, eq=False)
class KalmanState:
    mean: np.ndarray
    covariance: np.ndarray

    @property
    def center(self) -> tuple[float, float]:
        return float(self.mean[0]), float(self.mean[1])

    @property
    def velocity(self) -> tuple[float, float]:
        return float(self.mean[4]), float(self.mean[5])

    def to_bbox(self) -> BBox:
        cx, cy, w, h = self.mean[:4]
        return BBox.from_center(float(cx), float(cy), max(float(w), MIN_SIZE), max(float(h), MIN_SIZE))

    def with_velocity(self, vx: float, vy: float) -> "KalmanState":
        mean = self.mean.copy()
        mean[4], mean[5] = vx, vy
        return replace(self, mean=mean)


@dataclass(frozen=True, eq=False)
class KalmanModel:
    """Noise model of the filter.

    Noise standard deviations scale with the current box height, as in the
    ByteTrack family. ``fixed_q`` / ``fixed_r`` override the height-scaled
    matrices (``fixed_r`` is 6x6; its leading 4x4 block serves the 4-D update).
    """

    std_position: float = 1.0 / 20
    std_velocity: float = 1.0 / 160
    std_obs_position: float = 1.0 / 20
    std_obs_velocity: float = 1.0 / 10
    init_velocity_scale: float = 1000.0
    fixed_q: np.ndarray | None = None
    fixed_r: np.ndarray | None = None

    F = _F
    H6 = _H6
    H4 = _H4

    def process_noise(self, mean: np.ndarray) -> np.ndarray:
        if self.fixed_q is not None:
            return np.asarray(self.fixed_q, dtype=float)
        h = max(float(mean[3]), MIN_SIZE)
        std = np.r_[np.full(4, self.std_position * h), np.full(4, self.std_velocity * h)]
        return np.diag(std**2)

    def obs_noise6(self, mean: np.ndarray) -> np.ndarray:
        if self.fixed_r is not None:
            return np.asarray(self.fixed_r, dtype=float)
        h = max(float(mean[3]), MIN_SIZE)
        std = np.r_[np.full(4, self.std_obs_position * h), np.full(2, self.std_obs_velocity * h)]
        return np.diag(std**2)

    def obs_noise4(self, mean: np.ndarray) -> np.ndarray:
        return self.obs_noise6(mean)[:4, :4]


def initiate(bbox: BBox, model: KalmanModel) -> KalmanState:
    """New state at the box with zero velocity and an uninformative velocity prior."""
    mean = np.r_[bbox.to_cxcywh(), np.zeros(4)]
    r = np.diag(model.obs_noise6(mean))
    var = np.r_[r[:4], np.full(4, r[4:6].max() * model.init_velocity_scale)]
    return KalmanState(mean, np.diag(var))


def predict(state: KalmanState, model: KalmanModel) -> KalmanState:
    F = model.F
    mean = F @ state.mean
    cov = F @ state.covariance @ F.T + model.process_noise(state.mean)
    return KalmanState(mean, _symmetrize(cov))


def update6(state: KalmanState, z: np.ndarray, model: KalmanModel) -> KalmanState:
    """Update with a box and a displacement: z = [xc, yc, w, h, vx, vy]."""
    return _update(state, np.asarray(z, dtype=float), model.H6, model.obs_noise6(state.mean))


def update4(state: KalmanState, z: np.ndarray, model: KalmanModel) -> KalmanState:
    """Update with a box only: z = [xc, yc, w, h]."""
    return _update(state, np.asarray(z, dtype=float), model.H4, model.obs_noise4(state.mean))


def _update(state: KalmanState, z: np.ndarray, H: np.ndarray, R: np.ndarray) -> KalmanState:
    if z.shape != (H.shape[0],) or not np.all(np.isfinite(z)):
        raise ValueError(f"observation must be {H.shape[0]} finite values")
    P = state.covariance
    S = H @ P @ H.T + R
    try:
        chol = scipy.linalg.cho_factor(S, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise DegenerateCovarianceError("innovation covariance is not positive definite") from exc
    if np.any(np.diag(chol[0]) <= 1e-300):
        raise DegenerateCovarianceError("innovation covariance is singular")
    K = scipy.linalg.cho_solve(chol, H @ P, check_finite=False).T
    mean = state.mean + K @ (z - H @ state.mean)
    # Joseph form keeps P positive semi-definite under rounding
    IKH = np.eye(P.shape[0]) - K @ H
    cov = IKH @ P @ IKH.T + K @ R @ K.T
    mean[2] = max(mean[2], MIN_SIZE)
    mean[3] = max(mean[3], MIN_SIZE)
    return KalmanState(mean, _symmetrize(cov))


def position_gating_covariance(state: KalmanState, model: KalmanModel) -> np.ndarray:
    """2x2 innovation covariance of the center, used by the Mahalanobis comparator."""
    S = model.H4 @ state.covariance @ model.H4.T + model.obs_noise4(state.mean)
    return S[:2, :2]


def _symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)
