"""Bbox-Based Distance: a center residual whitened by box size and staleness.

The gating covariance is deterministic, diag((c*w)^2 * tau, (c*h)^2 * tau),
where tau is the time since the tracklet's last update clipped to
[alpha, beta] seconds. It replaces the Kalman covariance of the usual
Mahalanobis gate, which is unreliable when detections are sparse.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BbdParams:
    alpha: float = 0.025
    beta: float = 0.25
    c: float = 1.0

    def __post_init__(self):
        if not 0 < self.alpha <= self.beta:
            raise ValueError("need 0 < alpha <= beta")
        if self.c <= 0:
            raise ValueError("c must be positive")


def clip_tau(delta_tau: float, params: BbdParams = BbdParams()) -> float:
    return min(max(delta_tau, params.alpha), params.beta)


def gating_covariance(w: float, h: float, delta_tau: float, params: BbdParams = BbdParams()) -> np.ndarray:
    """Diagonal 2x2 covariance in pixels^2 * seconds."""
    tau = clip_tau(delta_tau, params)
    return np.diag([(params.c * w) ** 2 * tau, (params.c * h) ** 2 * tau])


def bbd(predicted_center, detected_center, cov: np.ndarray) -> float:
    dx = detected_center[0] - predicted_center[0]
    dy = detected_center[1] - predicted_center[1]
    return float(np.sqrt(dx * dx / cov[0, 0] + dy * dy / cov[1, 1]))


def bbd_matrix(
    track_centers: np.ndarray,
    track_sizes: np.ndarray,
    staleness: np.ndarray,
    det_centers: np.ndarray,
    params: BbdParams = BbdParams(),
) -> np.ndarray:
    """Pairwise BBD between N tracklets and M detections.

    Args:
        track_centers: (N, 2) predicted centers.
        track_sizes: (N, 2) widths and heights from the filter state.
        staleness: (N,) seconds since each tracklet's last update.
        det_centers: (M, 2) detection centers.
    """
    track_centers = np.asarray(track_centers, dtype=float).reshape(-1, 2)
    det_centers = np.asarray(det_centers, dtype=float).reshape(-1, 2)
    sizes = np.asarray(track_sizes, dtype=float).reshape(-1, 2)
    tau = np.clip(np.asarray(staleness, dtype=float), params.alpha, params.beta)
    var = (params.c * sizes) ** 2 * tau[:, None]
    d = det_centers[None, :, :] - track_centers[:, None, :]
    return np.sqrt(d[..., 0] ** 2 / var[:, None, 0] + d[..., 1] ** 2 / var[:, None, 1])


def mahalanobis_matrix(track_centers: np.ndarray, track_covs: np.ndarray, det_centers: np.ndarray) -> np.ndarray:
    """Classic Mahalanobis distance with per-tracklet 2x2 filter covariances.

    Only used as an ablation comparator against :func:`bbd_matrix`.
    """
    track_centers = np.asarray(track_centers, dtype=float).reshape(-1, 2)
    det_centers = np.asarray(det_centers, dtype=float).reshape(-1, 2)
    out = np.empty((len(track_centers), len(det_centers)))
    for i, (c, S) in enumerate(zip(track_centers, track_covs)):
        d = det_centers - c
        sol = np.linalg.solve(S, d.T)
        out[i] = np.sqrt(np.einsum("ij,ji->i", d, sol))
    return out
