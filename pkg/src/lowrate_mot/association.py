"""Two-stage appearance matching between tracklets and detections.

Stage 1 admits pairs that are close in Bbox-Based Distance and highly similar
in appearance. Stage 2 revisits the leftovers, admitting pairs whose boxes
overlap well even when appearance is only moderately similar.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .assignment import solve
from .core import MalformedInputError, iou_matrix

INF = np.inf


@dataclass(frozen=True)
class AssociationConfig:
    theta_bbd: float = 16.0
    theta_iou: float = 0.4
    theta_reid_high: float = 0.65
    theta_reid_low: float = 0.3
    two_stage: bool = True

    def __post_init__(self):
        if not self.theta_reid_low < self.theta_reid_high:
            raise ValueError("theta_reid_low must be below theta_reid_high")
        if not 0 < self.theta_iou < 1:
            raise ValueError("theta_iou must lie in (0, 1)")
        if self.theta_bbd <= 0:
            raise ValueError("theta_bbd must be positive")


@dataclass(frozen=True)
class Match:
    track: int
    detection: int
    stage: int
    similarity: float


@dataclass
class AssociationOutcome:
    matches: list[Match] = field(default_factory=list)
    unmatched_tracklets: list[int] = field(default_factory=list)
    unmatched_detections: list[int] = field(default_factory=list)

    def stage(self, k: int) -> list[Match]:
        return [m for m in self.matches if m.stage == k]


def _check(gate: np.ndarray, s: np.ndarray):
    if gate.shape != s.shape:
        raise MalformedInputError(f"gate matrix {gate.shape} does not match similarity matrix {s.shape}")


def stage1_costs(distance: np.ndarray, s: np.ndarray, config: AssociationConfig = AssociationConfig(),
                 threshold: float | None = None) -> np.ndarray:
    """1 - s where distance < threshold and s > theta_reid_high, else inf.

    ``distance`` is the tracklet x detection gating distance (BBD by
    default); ``threshold`` overrides ``theta_bbd`` for other distances.
    """
    distance = np.asarray(distance, dtype=float)
    s = np.asarray(s, dtype=float)
    _check(distance, s)
    thr = config.theta_bbd if threshold is None else threshold
    ok = (distance < thr) & (s > config.theta_reid_high)
    return np.where(ok, 1.0 - s, INF)


def stage2_costs(overlap: np.ndarray, s: np.ndarray, config: AssociationConfig = AssociationConfig()) -> np.ndarray:
    """1 - s where IoU > theta_iou and s > theta_reid_low, else inf."""
    overlap = np.asarray(overlap, dtype=float)
    s = np.asarray(s, dtype=float)
    _check(overlap, s)
    ok = (overlap > config.theta_iou) & (s > config.theta_reid_low)
    return np.where(ok, 1.0 - s, INF)


def reid_only_costs(s: np.ndarray, config: AssociationConfig = AssociationConfig()) -> np.ndarray:
    """Appearance-only costs of the single-stage baseline."""
    s = np.asarray(s, dtype=float)
    return np.where(s > config.theta_reid_high, 1.0 - s, INF)


def associate(
    track_boxes: np.ndarray,
    det_boxes: np.ndarray,
    s_matrix: np.ndarray,
    config: AssociationConfig = AssociationConfig(),
    *,
    gate_distance: np.ndarray,
    gate_threshold: float | None = None,
    track_ids=None,
) -> AssociationOutcome:
    """Match tracklets to detections in two sequential Hungarian stages.

    Args:
        track_boxes: (N, 4) xywh tracklet boxes at the association frame.
        det_boxes: (M, 4) xywh detection boxes at the association frame.
        s_matrix: (N, M) appearance cosine similarities.
        gate_distance: (N, M) stage-1 spatial distance (see :func:`bbd.bbd_matrix`).
        gate_threshold: Overrides ``config.theta_bbd``.
        track_ids: Labels reported for tracklets (defaults to row indices).

    Returns:
        The outcome; ``track`` fields carry ``track_ids`` labels and
        ``detection`` fields are column indices.
    """
    track_boxes = np.asarray(track_boxes, dtype=float).reshape(-1, 4)
    det_boxes = np.asarray(det_boxes, dtype=float).reshape(-1, 4)
    n, m = len(track_boxes), len(det_boxes)
    s = np.asarray(s_matrix, dtype=float).reshape(n, m)
    labels = list(range(n)) if track_ids is None else list(track_ids)
    if len(labels) != n:
        raise MalformedInputError("track_ids length differs from track_boxes")

    matches: list[Match] = []
    if not config.two_stage:
        c = reid_only_costs(s, config)
        for r, col in solve(c):
            matches.append(Match(labels[r], col, 1, float(s[r, col])))
        return _finish(matches, labels, m, n)

    c1 = stage1_costs(np.asarray(gate_distance, dtype=float).reshape(n, m), s, config, gate_threshold)
    used_r, used_c = set(), set()
    for r, col in solve(c1):
        if s[r, col] > config.theta_reid_high:
            matches.append(Match(labels[r], col, 1, float(s[r, col])))
            used_r.add(r)
            used_c.add(col)

    rows = [r for r in range(n) if r not in used_r]
    cols = [c for c in range(m) if c not in used_c]
    if rows and cols:
        ov = iou_matrix(track_boxes[rows], det_boxes[cols])
        c2 = stage2_costs(ov, s[np.ix_(rows, cols)], config)
        for a, b in solve(c2):
            r, col = rows[a], cols[b]
            if s[r, col] > config.theta_reid_low:
                matches.append(Match(labels[r], col, 2, float(s[r, col])))
    return _finish(matches, labels, m, n)


def _finish(matches: list[Match], labels: list, m: int, n: int) -> AssociationOutcome:
    mt = {mm.track for mm in matches}
    md = {mm.detection for mm in matches}
    return AssociationOutcome(
        matches=matches,
        unmatched_tracklets=[labels[r] for r in range(n) if labels[r] not in mt],
        unmatched_detections=[c for c in range(m) if c not in md],
    )
