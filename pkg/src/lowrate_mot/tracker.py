"""Tracking-by-detection pipeline for sparse (low-frequency) detections.

Each step receives the detections of frame t together with the intermediate
frame at t - dt/2. Detections are tracked backward and tracklets forward to
that intermediate frame, matched there in two stages, and then the matched
filters are advanced to frame t in two update/predict half-steps.
"""

from __future__ import annotations

import math
import time
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kalman as kf
from .association import AssociationConfig, AssociationOutcome, associate
from .bbd import BbdParams, bbd_matrix, mahalanobis_matrix
from .core import BBox, Detection, MalformedInputError, normalize, similarity_matrix
from .kalman import KalmanModel, KalmanState
from .visual_tracking import ImageFrame, MeanShiftModel, VtParams, backward_vt, forward_vt


LOW_FREQUENCY = "low_frequency"
FULL_FREQUENCY = "full_frequency"

# 95% chi-square quantile with 2 degrees of freedom
CHI2_95_2DOF = 5.991464547107979


class StreamOrderError(MalformedInputError):
    """Detection timestamps are not strictly increasing."""


@dataclass(frozen=True)
class PipelineConfig:
    """Run-level settings.

    ``gate`` selects the stage-1 spatial distance: ``"bbd"`` for the
    Bbox-Based Distance, ``"mahalanobis"`` for the filter-covariance
    comparator used in ablations.
    """

    delta_t: float = 1.0
    mode: str = LOW_FREQUENCY
    t_live: float = 2.0
    ema_lambda: float = 0.9
    init_confidence: float = 0.6
    association: AssociationConfig = field(default_factory=AssociationConfig)
    bbd: BbdParams = field(default_factory=BbdParams)
    vt: VtParams = field(default_factory=VtParams)
    kalman: KalmanModel = field(default_factory=KalmanModel)
    gate: str = "bbd"
    theta_mahalanobis: float = math.sqrt(CHI2_95_2DOF)
    emit_coasted: bool = True
    threads: int = 1

    def __post_init__(self):
        if self.delta_t <= 0:
            raise ValueError("delta_t must be positive")
        if not 0 < self.ema_lambda < 1:
            raise ValueError("ema_lambda must lie in (0, 1)")
        if self.t_live <= 0:
            raise ValueError("t_live must be positive")
        if self.mode not in (LOW_FREQUENCY, FULL_FREQUENCY):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.gate not in ("bbd", "mahalanobis"):
            raise ValueError(f"unknown gate {self.gate!r}")


@dataclass(eq=False)
class Tracklet:
    id: int
    state: KalmanState
    ema_embedding: np.ndarray
    last_update_time: float
    origin_bbox: BBox
    created_time: float
    confidence: float
    vt_model: MeanShiftModel | None = None


@dataclass(frozen=True)
class TrackRow:
    track_id: int
    bbox: BBox
    confidence: float
    matched: bool = True


@dataclass
class _Prop:
    """Per-step scratch data for one tracklet."""

    velocity: tuple[float, float]
    visual: bool
    mid: KalmanState


def ema_update(e: np.ndarray, f: np.ndarray, lam: float) -> np.ndarray:
    return normalize(lam * e + (1.0 - lam) * f)


def remove_old_tracklets(tracklets: list[Tracklet], now: float, config: PipelineConfig) -> list[Tracklet]:
    return [t for t in tracklets if now - t.last_update_time <= config.t_live]


class StableTracker:
    """Online tracker; feed one detection frame at a time through :meth:`step`."""

    def __init__(self, config: PipelineConfig = PipelineConfig()):
        self.config = config
        self.tracklets: list[Tracklet] = []
        self.next_id = 1
        self.last_time: float | None = None
        self.prev_frame: ImageFrame | None = None
        self.timings: defaultdict[str, float] = defaultdict(float)
        self.kf_calls: Counter = Counter()  # (track id, "predict"/"update") in the last step
        self.vt_calls = 0
        self.last_outcome: AssociationOutcome | None = None
        self._pool = ThreadPoolExecutor(config.threads) if config.threads > 1 else None

    # ------------------------------------------------------------------ KF helpers
    def _predict(self, tr: Tracklet, state: KalmanState) -> KalmanState:
        self.kf_calls[(tr.id, "predict")] += 1
        return kf.predict(state, self.config.kalman)

    def _update4(self, tr: Tracklet, state: KalmanState, box: BBox) -> KalmanState:
        self.kf_calls[(tr.id, "update")] += 1
        return kf.update4(state, box.to_cxcywh(), self.config.kalman)

    def _update6(self, tr: Tracklet, state: KalmanState, box: BBox, v) -> KalmanState:
        self.kf_calls[(tr.id, "update")] += 1
        return kf.update6(state, np.r_[box.to_cxcywh(), v], self.config.kalman)

    def _map(self, fn, items):
        if self._pool is None:
            return [fn(x) for x in items]
        return list(self._pool.map(fn, items))

    # ------------------------------------------------------------------ main loop
    def step(
        self,
        detections: list[Detection],
        t: float,
        frame_t: ImageFrame | None = None,
        frame_mid: ImageFrame | None = None,
    ) -> list[TrackRow]:
        """Process the detections of the frame at time ``t`` (seconds).

        In low-frequency mode ``frame_t`` and ``frame_mid`` (the frame at
        t - delta_t/2) are required whenever tracklets exist. Full-frequency
        mode uses no images.
        """
        if self.last_time is not None and t <= self.last_time:
            raise StreamOrderError(f"time {t} does not follow {self.last_time}")
        for d in detections:
            if abs(d.frame_time - t) > 1e-9:
                raise StreamOrderError(f"detection at {d.frame_time} passed to step at {t}")
        self.kf_calls = Counter()
        cfg = self.config
        low = cfg.mode == LOW_FREQUENCY
        if low and self.tracklets and (frame_t is None or frame_mid is None or self.prev_frame is None):
            raise MalformedInputError("low-frequency mode needs the current and intermediate frames")

        if low:
            rows = self._step_low(detections, t, frame_t, frame_mid)
        else:
            rows = self._step_full(detections, t)
        self.last_time = t
        self.prev_frame = frame_t
        return rows

    def _gate_distance(self, mids: list[KalmanState], det_centers: np.ndarray, assoc_time: float) -> tuple[np.ndarray, float]:
        cfg = self.config
        centers = np.array([s.mean[:2] for s in mids]).reshape(-1, 2)
        if cfg.gate == "mahalanobis":
            covs = [kf.position_gating_covariance(s, cfg.kalman) for s in mids]
            return mahalanobis_matrix(centers, covs, det_centers), cfg.theta_mahalanobis
        sizes = np.array([np.maximum(s.mean[2:4], kf.MIN_SIZE) for s in mids]).reshape(-1, 2)
        stale = np.array([assoc_time - tr.last_update_time for tr in self.tracklets])
        return bbd_matrix(centers, sizes, stale, det_centers, cfg.bbd), cfg.association.theta_bbd

    def _associate(self, mids, det_boxes, detections, assoc_time) -> AssociationOutcome:
        t0 = time.perf_counter()
        det_xywh = np.array([b.to_xywh() for b in det_boxes]).reshape(-1, 4)
        trk_xywh = np.array([s.to_bbox().to_xywh() for s in mids]).reshape(-1, 4)
        det_centers = det_xywh[:, :2] + det_xywh[:, 2:] / 2.0
        dist, thr = self._gate_distance(mids, det_centers, assoc_time)
        s = similarity_matrix(
            np.array([tr.ema_embedding for tr in self.tracklets]),
            np.array([d.embedding for d in detections]),
        )
        outcome = associate(
            trk_xywh, det_xywh, s, self.config.association,
            gate_distance=dist, gate_threshold=thr, track_ids=range(len(self.tracklets)),
        )
        self.timings["association"] += time.perf_counter() - t0
        self.last_outcome = outcome
        return outcome

    def _step_low(self, detections, t, frame_t, frame_mid) -> list[TrackRow]:
        cfg = self.config
        rows: list[TrackRow] = []
        matched_dets: set[int] = set()
        bwd: list[tuple[BBox, bool, MeanShiftModel | None]] = []
        t_mid = t - cfg.delta_t / 2.0

        if self.tracklets and detections:
            t0 = time.perf_counter()
            bwd = self._map(lambda d: backward_vt(d.bbox, frame_t, frame_mid, cfg.vt), detections)
            self.vt_calls += len(detections)
            self.timings["vt"] += time.perf_counter() - t0

        if self.tracklets:
            t0 = time.perf_counter()

            def fwd(tr: Tracklet):
                start = tr.origin_bbox if tr.last_update_time == self.last_time else tr.state.to_bbox()
                obs, _ = forward_vt(tr, self.prev_frame, frame_mid, cfg.vt, start=start)
                return obs

            observations = self._map(fwd, self.tracklets)
            self.vt_calls += len(self.tracklets)
            t1 = time.perf_counter()
            self.timings["vt"] += t1 - t0
            props = []
            for tr, obs in zip(self.tracklets, observations):
                mid = self._predict(tr, tr.state.with_velocity(*obs.v))
                props.append(_Prop(obs.v, obs.source == "visual", mid))
            self.timings["kalman"] += time.perf_counter() - t1

            outcome = None
            if detections:
                outcome = self._associate([p.mid for p in props], [b[0] for b in bwd], detections, t_mid)

            t0 = time.perf_counter()
            matched_tracks = {}
            if outcome is not None:
                for m in outcome.matches:
                    matched_tracks[m.track] = m.detection
            for k, (tr, prop) in enumerate(zip(self.tracklets, props)):
                if k in matched_tracks:
                    j = matched_tracks[k]
                    det = detections[j]
                    box_mid, ok, model = bwd[j]
                    self._update_matched(tr, prop, det, box_mid if ok else None, model, t)
                    matched_dets.add(j)
                    rows.append(TrackRow(tr.id, det.bbox, det.confidence, True))
                else:
                    tr.state = self._predict(tr, prop.mid)
            self.timings["kalman"] += time.perf_counter() - t0

        t0 = time.perf_counter()
        matched_ids = {r.track_id for r in rows}
        survivors = remove_old_tracklets(self.tracklets, t, cfg)
        if cfg.emit_coasted:
            rows.extend(
                TrackRow(tr.id, tr.state.to_bbox(), 0.0, False) for tr in survivors if tr.id not in matched_ids
            )
        new = self.create_new_tracklets(
            [(j, d) for j, d in enumerate(detections) if j not in matched_dets], t,
            models={j: bwd[j][2] for j in range(len(bwd))},
        )
        rows.extend(TrackRow(tr.id, tr.origin_bbox, tr.confidence, True) for tr in new)
        self.tracklets = survivors + new
        self.timings["management"] += time.perf_counter() - t0
        return sorted(rows, key=lambda r: r.track_id)

    def _update_matched(self, tr: Tracklet, prop: _Prop, det: Detection, box_mid: BBox | None, model, t: float):
        """Two half-step corrections: at the intermediate frame, then at frame t."""
        if box_mid is None:
            # backward tracking failed: step the detection back by the tracklet displacement
            box_mid = det.bbox.translate(-prop.velocity[0], -prop.velocity[1])
        state = self._update6(tr, prop.mid, box_mid, prop.velocity)
        (mx, my), (dx, dy) = box_mid.center, det.bbox.center
        state = self._predict(tr, state.with_velocity(dx - mx, dy - my))
        state = self._update4(tr, state, det.bbox)
        self._finish_match(tr, state, det, t)
        tr.vt_model = model

    def _finish_match(self, tr: Tracklet, state: KalmanState, det: Detection, t: float):
        tr.state = state
        tr.ema_embedding = ema_update(tr.ema_embedding, det.embedding, self.config.ema_lambda)
        tr.last_update_time = t
        tr.origin_bbox = det.bbox
        tr.confidence = det.confidence
        tr.vt_model = None

    def _step_full(self, detections, t) -> list[TrackRow]:
        cfg = self.config
        rows: list[TrackRow] = []
        matched_dets: set[int] = set()
        if self.tracklets:
            t0 = time.perf_counter()
            mids = [self._predict(tr, tr.state) for tr in self.tracklets]
            self.timings["kalman"] += time.perf_counter() - t0
            outcome = self._associate(mids, [d.bbox for d in detections], detections, t) if detections else None
            t0 = time.perf_counter()
            matched = {m.track: m.detection for m in outcome.matches} if outcome else {}
            for k, (tr, mid) in enumerate(zip(self.tracklets, mids)):
                if k in matched:
                    det = detections[matched[k]]
                    self._finish_match(tr, self._update4(tr, mid, det.bbox), det, t)
                    matched_dets.add(matched[k])
                    rows.append(TrackRow(tr.id, det.bbox, det.confidence, True))
                else:
                    tr.state = mid
            self.timings["kalman"] += time.perf_counter() - t0

        matched_ids = {r.track_id for r in rows}
        survivors = remove_old_tracklets(self.tracklets, t, cfg)
        if cfg.emit_coasted:
            rows.extend(
                TrackRow(tr.id, tr.state.to_bbox(), 0.0, False) for tr in survivors if tr.id not in matched_ids
            )
        new = self.create_new_tracklets([(j, d) for j, d in enumerate(detections) if j not in matched_dets], t)
        rows.extend(TrackRow(tr.id, tr.origin_bbox, tr.confidence, True) for tr in new)
        self.tracklets = survivors + new
        return sorted(rows, key=lambda r: r.track_id)

    def create_new_tracklets(self, detections, t: float, models=None) -> list[Tracklet]:
        """One tracklet per confident unmatched detection.

        Args:
            detections: (index, Detection) pairs.
            models: optional index -> color model built from the same crop.
        """
        out = []
        for j, d in detections:
            if d.confidence < self.config.init_confidence:
                continue
            tr = Tracklet(
                id=self.next_id,
                state=kf.initiate(d.bbox, self.config.kalman),
                ema_embedding=d.embedding.copy(),
                last_update_time=t,
                origin_bbox=d.bbox,
                created_time=t,
                confidence=d.confidence,
                vt_model=(models or {}).get(j),
            )
            self.next_id += 1
            out.append(tr)
        return out

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
