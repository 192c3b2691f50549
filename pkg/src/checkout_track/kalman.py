"""Constant-velocity Kalman filter over (cx, cy, w, h) box states.

Process and measurement noise scale with the box height, as in the SORT
family of trackers.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from checkout_track.core import BBox
from checkout_track.kernels import kf_predict, kf_update

STD_POS = 1.0 / 20.0
STD_VEL = 1.0 / 160.0


@dataclass(frozen=True, eq=False)
class KalmanState:
    mean: np.ndarray        # (cx, cy, w, h, vcx, vcy, vw, vh)
    covariance: np.ndarray  # 8 x 8

    def __post_init__(self):
        self.mean.setflags(write=False)
        self.covariance.setflags(write=False)

    def bbox_array(self) -> np.ndarray:
        cx, cy, w, h = self.mean[:4]
        return np.array([cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0])

    def bbox(self) -> BBox:
        return BBox(*self.bbox_array())

    def trace(self) -> float:
        return float(np.trace(self.covariance))


def measurement(box) -> np.ndarray:
    if isinstance(box, BBox):
        box = box.as_tuple()
    x1, y1, x2, y2 = box
    w, h = x2 - x1, y2 - y1
    if not (w > 0 and h > 0):
        raise ValueError(f"measured box must have positive width and height, got {box}")
    return np.array([x1 + w / 2.0, y1 + h / 2.0, w, h])


def kalman_initiate(box, std_pos: float = STD_POS, std_vel: float = STD_VEL) -> KalmanState:
    """New state at the measured box with zero velocity and wide covariance."""
    z = measurement(box)
    h = z[3]
    mean = np.concatenate([z, np.zeros(4)])
    std = np.array([2 * std_pos * h] * 4 + [10 * std_vel * h] * 4)
    return KalmanState(mean, np.diag(std**2))


def kalman_predict(state: KalmanState, std_pos: float = STD_POS, std_vel: float = STD_VEL) -> KalmanState:
    mean, cov = kf_predict(state.mean, state.covariance, std_pos, std_vel)
    return KalmanState(mean, cov)


def kalman_update(state: KalmanState, box, std_pos: float = STD_POS) -> KalmanState:
    mean, cov = kf_update(state.mean, state.covariance, measurement(box), std_pos)
    return KalmanState(mean, cov)
