"""Scale-adaptive mean-shift tracking on color histograms.

The target is a kernel-weighted RGB histogram of the box interior. Tracking
moves the window by mean shift on back-projected weights and picks a scale
among a small candidate set once the center settles. :func:`forward_vt` and
:func:`backward_vt` move tracklets and detections to the intermediate frame
between two detection frames.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol

import numpy as np
from numba import njit

from .core import BBox, MalformedInputError
from .kalman import KalmanState


class UnusableDetectionError(ValueError):
    """The box does not overlap the frame."""


@dataclass(frozen=True, eq=False)
class ImageFrame:
    """RGB8 image, ``pixels`` shaped (height, width, 3)."""

    pixels: np.ndarray
    _bins_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        px = self.pixels
        if px.ndim != 3 or px.shape[2] != 3 or px.shape[0] < 1 or px.shape[1] < 1:
            raise MalformedInputError(f"expected (H, W, 3) pixels, got {px.shape}")
        if px.dtype != np.uint8:
            raise MalformedInputError("pixels must be uint8")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def bin_index(self, bins: int) -> np.ndarray:
        """Per-pixel quantized color index in [0, bins**3)."""
        idx = self._bins_cache.get(bins)
        if idx is None:
            q = (self.pixels.astype(np.int32) * bins) >> 8
            idx = (q[..., 0] * bins + q[..., 1]) * bins + q[..., 2]
            self._bins_cache[bins] = idx
        return idx


@dataclass(frozen=True)
class VtParams:
    bins: int = 16
    max_iter: int = 15
    min_shift: float = 0.5
    scales: tuple[float, ...] = (0.95, 1.0, 1.05)
    scale_smoothing: float = 0.7
    scale_penalty: float = 0.1
    scale_bounds: tuple[float, float] = (0.8, 1.25)
    failure_threshold: float = 0.4


@dataclass(frozen=True, eq=False)
class MeanShiftModel:
    """Target color model.

    ``histogram`` is the full normalized histogram (``bins**3`` entries);
    ``support`` lists its nonzero bins and ``lut`` maps every bin to its
    position in ``support`` (or -1).
    """

    histogram: np.ndarray
    bins: int
    ref_size: tuple[float, float]
    support: np.ndarray = field(init=False, repr=False)
    lut: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        support = np.flatnonzero(self.histogram)
        lut = np.full(self.histogram.shape[0], -1, dtype=np.int64)
        lut[support] = np.arange(len(support))
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "lut", lut)


@dataclass(frozen=True)
class VtResult:
    bbox: BBox
    similarity: float
    converged: bool


@dataclass(frozen=True)
class DisplacementObservation:
    v: tuple[float, float]
    source: str  # "visual" or "kalman_fallback"


@njit(cache=True)
def _support_hist(idx_img, lut, nsup, cx, cy, w, h, out):
    """Kernel-weighted histogram restricted to the model's support bins.

    Fills ``out`` (length ``nsup``) with normalized mass and returns the
    total kernel weight of the window (0 when it misses the frame).
    """
    H, W = idx_img.shape
    hw = w / 2.0
    hh = h / 2.0
    x0 = max(int(np.floor(cx - hw)), 0)
    x1 = min(int(np.ceil(cx + hw)), W)
    y0 = max(int(np.floor(cy - hh)), 0)
    y1 = min(int(np.ceil(cy + hh)), H)
    out[:] = 0.0
    total = 0.0
    for y in range(y0, y1):
        dy = (y + 0.5 - cy) / hh
        dy2 = dy * dy
        for x in range(x0, x1):
            dx = (x + 0.5 - cx) / hw
            r2 = dx * dx + dy2
            if r2 < 1.0:
                k = 1.0 - r2
                total += k
                s = lut[idx_img[y, x]]
                if s >= 0:
                    out[s] += k
    if total > 0:
        for i in range(nsup):
            out[i] /= total
    return total


@njit(cache=True)
def _bhatt(qs, ps):
    acc = 0.0
    for i in range(qs.shape[0]):
        acc += np.sqrt(qs[i] * ps[i])
    return min(acc, 1.0)


@njit(cache=True)
def _shift(idx_img, lut, qs, ps, cx, cy, w, h):
    """One mean-shift step; returns the new center and the weight mass."""
    H, W = idx_img.shape
    hw = w / 2.0
    hh = h / 2.0
    x0 = max(int(np.floor(cx - hw)), 0)
    x1 = min(int(np.ceil(cx + hw)), W)
    y0 = max(int(np.floor(cy - hh)), 0)
    y1 = min(int(np.ceil(cy + hh)), H)
    ratio = np.zeros(qs.shape[0])
    for i in range(qs.shape[0]):
        if ps[i] > 0:
            ratio[i] = np.sqrt(qs[i] / ps[i])
    sx = 0.0
    sy = 0.0
    sw = 0.0
    for y in range(y0, y1):
        dy = (y + 0.5 - cy) / hh
        dy2 = dy * dy
        for x in range(x0, x1):
            dx = (x + 0.5 - cx) / hw
            if dx * dx + dy2 < 1.0:
                s = lut[idx_img[y, x]]
                if s >= 0:
                    wt = ratio[s]
                    sx += wt * (x + 0.5)
                    sy += wt * (y + 0.5)
                    sw += wt
    if sw <= 0:
        return cx, cy, 0.0
    return sx / sw, sy / sw, sw


@njit(cache=True)
def _track_loop(idx_img, lut, qs, cx, cy, w, h, w0, h0, max_iter, min_shift,
                scales, smoothing, penalty, lo, hi):
    nsup = qs.shape[0]
    ps = np.empty(nsup)
    cand = np.empty(nsup)
    converged = False
    # location first, then scale: a solid-color window always prefers shrinking
    # while it is misaligned, so scale is only adapted on a settled center
    total = _support_hist(idx_img, lut, nsup, cx, cy, w, h, ps)
    for _ in range(max_iter):
        if total <= 0:
            break
        ncx, ncy, mass = _shift(idx_img, lut, qs, ps, cx, cy, w, h)
        if mass <= 0:
            break
        shift = np.hypot(ncx - cx, ncy - cy)
        cx = ncx
        cy = ncy
        if shift < min_shift:
            converged = True
            best_s = 1.0
            best_score = -1e300
            for s in scales:
                t = _support_hist(idx_img, lut, nsup, cx, cy, w * s, h * s, cand)
                rel = np.sqrt((w * s * h * s) / (w0 * h0))
                score = (_bhatt(qs, cand) if t > 0 else 0.0) - penalty * abs(np.log(rel))
                if score > best_score + 1e-9 or (abs(score - best_score) <= 1e-9 and s == 1.0):
                    best_s = s
                    best_score = score
            f = smoothing + (1.0 - smoothing) * best_s
            w = w0 * min(max(w * f / w0, lo), hi)
            h = h0 * min(max(h * f / h0, lo), hi)
            total = _support_hist(idx_img, lut, nsup, cx, cy, w, h, ps)
            break
        total = _support_hist(idx_img, lut, nsup, cx, cy, w, h, ps)
    sim = _bhatt(qs, ps) if total > 0 else 0.0
    return cx, cy, w, h, sim, converged


def init_model(frame: ImageFrame, bbox: BBox, bins: int = 16) -> MeanShiftModel:
    """Epanechnikov-weighted normalized color histogram of the box interior."""
    if bins < 2:
        raise ValueError("need at least 2 bins per channel")
    nbins = bins**3
    lut = np.arange(nbins, dtype=np.int64)
    hist = np.empty(nbins)
    cx, cy = bbox.center
    total = _support_hist(frame.bin_index(bins), lut, nbins, cx, cy, bbox.w, bbox.h, hist)
    if total <= 0:
        raise UnusableDetectionError(f"{bbox} lies outside the {frame.width}x{frame.height} frame")
    return MeanShiftModel(hist, bins, (bbox.w, bbox.h))


def histogram(frame: ImageFrame, bbox: BBox, bins: int = 16) -> np.ndarray | None:
    try:
        return init_model(frame, bbox, bins).histogram
    except UnusableDetectionError:
        return None


def bhattacharyya(p: np.ndarray, q: np.ndarray) -> float:
    return float(min(np.sqrt(np.asarray(p) * np.asarray(q)).sum(), 1.0))


def track(model: MeanShiftModel, frame: ImageFrame, start: BBox, params: VtParams = VtParams()) -> VtResult:
    """Mean-shift search for the model starting at ``start``.

    ``converged`` is False when the iteration cap is hit, the window loses
    the target, or the final similarity is below the failure threshold.
    """
    qs = model.histogram[model.support]
    cx, cy = start.center
    lo, hi = params.scale_bounds
    cx, cy, w, h, sim, settled = _track_loop(
        frame.bin_index(model.bins), model.lut, qs, cx, cy, float(start.w), float(start.h),
        float(model.ref_size[0]), float(model.ref_size[1]), params.max_iter, params.min_shift,
        np.asarray(params.scales, dtype=float), params.scale_smoothing, params.scale_penalty, lo, hi,
    )
    ok = bool(settled) and sim >= params.failure_threshold
    return VtResult(BBox.from_center(float(cx), float(cy), float(w), float(h)), float(sim), ok)


class TrackletLike(Protocol):
    vt_model: MeanShiftModel | None
    origin_bbox: BBox
    state: KalmanState


def forward_vt(
    tracklet: TrackletLike,
    frame_prev: ImageFrame,
    frame_mid: ImageFrame,
    params: VtParams = VtParams(),
    start: BBox | None = None,
) -> tuple[DisplacementObservation, VtResult | None]:
    """Propagate a tracklet from the previous detection frame to the intermediate one.

    The search starts at ``start`` (the tracklet's origin box by default) and
    the displacement is measured from that box's center. If tracking fails,
    the displacement falls back to the filter velocity, which already spans
    one half-interval.
    """
    start = start or tracklet.origin_bbox
    model = tracklet.vt_model
    if model is None:
        try:
            model = init_model(frame_prev, tracklet.origin_bbox, params.bins)
        except UnusableDetectionError:
            model = None
        tracklet.vt_model = model
    result = None
    if model is not None:
        result = track(model, frame_mid, start, params)
        if result.converged:
            (x0, y0), (x1, y1) = start.center, result.bbox.center
            return DisplacementObservation((x1 - x0, y1 - y0), "visual"), result
    return DisplacementObservation(tracklet.state.velocity, "kalman_fallback"), result


def backward_vt(
    detection_bbox: BBox,
    frame_cur: ImageFrame,
    frame_mid: ImageFrame,
    params: VtParams = VtParams(),
    model: MeanShiftModel | None = None,
) -> tuple[BBox, bool, MeanShiftModel | None]:
    """Move a detection from the current frame back to the intermediate frame.

    Returns the intermediate box, whether visual tracking succeeded, and the
    model built from the detection crop (reusable as the tracklet's model).
    On failure the detection box is returned unchanged.
    """
    if model is None:
        try:
            model = init_model(frame_cur, detection_bbox, params.bins)
        except UnusableDetectionError:
            return detection_bbox, False, None
    result = track(model, frame_mid, detection_bbox, params)
    if result.converged:
        return result.bbox, True, model
    return detection_bbox, False, model
