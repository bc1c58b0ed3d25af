"""Constant-velocity Kalman filter over (cx, cy, aspect, h) and their velocities.

Noise follows the DeepSORT convention: position and velocity standard
deviations proportional to the box height. The batched ``*_many`` functions
are what the trackers run; the single-state functions wrap them so both paths
share one set of arithmetic.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import BBox, Detection

NDIM = 4
MIN_HEIGHT = 1e-3

_F = np.eye(2 * NDIM)
_F[:NDIM, NDIM:] = np.eye(NDIM)


class KalmanNumericalError(ArithmeticError):
    """Innovation covariance is not positive definite."""


@dataclass(frozen=True)
class KalmanParams:
    std_pos: float = 1.0 / 20
    std_vel: float = 1.0 / 160
    std_aspect: float = 1e-2
    std_aspect_vel: float = 1e-5
    std_meas_aspect: float = 1e-1
    process_scale: float = 1.0
    measurement_scale: float = 1.0


@dataclass
class KalmanState:
    mean: np.ndarray
    covariance: np.ndarray

    @property
    def box(self) -> BBox:
        return xyah_to_box(self.mean[:4])


def box_to_xyah(b: BBox) -> np.ndarray:
    return np.array([b.x + b.w / 2.0, b.y + b.h / 2.0, b.w / b.h, b.h])


def xyah_to_box(m) -> BBox:
    cx, cy, a, h = (float(v) for v in m[:4])
    h = max(h, MIN_HEIGHT)
    w = max(a * h, MIN_HEIGHT)
    return BBox(cx - w / 2.0, cy - h / 2.0, w, h)


def xyah_to_tlwh(means: np.ndarray) -> np.ndarray:
    """(n, >=4) xyah rows to (n, 4) tlwh rows."""
    h = np.maximum(means[:, 3], MIN_HEIGHT)
    w = np.maximum(means[:, 2] * h, MIN_HEIGHT)
    return np.column_stack([means[:, 0] - w / 2, means[:, 1] - h / 2, w, h])


def kf_init(d: Detection, params: KalmanParams = KalmanParams()) -> KalmanState:
    z = box_to_xyah(d.box)
    mean = np.concatenate([z, np.zeros(NDIM)])
    h = z[3]
    std = np.array([
        2 * params.std_pos * h, 2 * params.std_pos * h, 1e-2, 2 * params.std_pos * h,
        10 * params.std_vel * h, 10 * params.std_vel * h, 1e-5, 10 * params.std_vel * h,
    ])
    return KalmanState(mean, np.diag(std ** 2))


def predict_many(means: np.ndarray, covs: np.ndarray, params: KalmanParams = KalmanParams()):
    h = means[:, 3]
    std = np.column_stack([
        params.std_pos * h, params.std_pos * h, np.full_like(h, params.std_aspect), params.std_pos * h,
        params.std_vel * h, params.std_vel * h, np.full_like(h, params.std_aspect_vel), params.std_vel * h,
    ]) * params.process_scale
    means = means @ _F.T
    covs = _F @ covs @ _F.T
    idx = np.arange(2 * NDIM)
    covs[:, idx, idx] += std ** 2
    means[:, 3] = np.maximum(means[:, 3], MIN_HEIGHT)
    return means, covs


def update_many(means: np.ndarray, covs: np.ndarray, z: np.ndarray, params: KalmanParams = KalmanParams()):
    h = means[:, 3]
    r = np.column_stack([
        params.std_pos * h, params.std_pos * h, np.full_like(h, params.std_meas_aspect), params.std_pos * h,
    ]) * params.measurement_scale
    s = covs[:, :NDIM, :NDIM].copy()
    idx = np.arange(NDIM)
    s[:, idx, idx] += r ** 2
    try:
        np.linalg.cholesky(s)
    except np.linalg.LinAlgError:
        raise KalmanNumericalError("innovation covariance is not positive definite") from None
    pht = covs[:, :, :NDIM]
    gain = np.linalg.solve(s, pht.transpose(0, 2, 1)).transpose(0, 2, 1)
    innovation = z - means[:, :NDIM]
    means = means + np.einsum("nij,nj->ni", gain, innovation)
    covs = covs - gain @ s @ gain.transpose(0, 2, 1)
    covs = 0.5 * (covs + covs.transpose(0, 2, 1))
    means[:, 3] = np.maximum(means[:, 3], MIN_HEIGHT)
    return means, covs


def kf_predict(s: KalmanState, params: KalmanParams = KalmanParams()) -> KalmanState:
    m, c = predict_many(s.mean[None], s.covariance[None], params)
    return KalmanState(m[0], c[0])


def kf_update(s: KalmanState, d: Detection, params: KalmanParams = KalmanParams()) -> KalmanState:
    m, c = update_many(s.mean[None], s.covariance[None], box_to_xyah(d.box)[None], params)
    return KalmanState(m[0], c[0])
