"""Drive a tracker over a whole sequence under a subsampling schedule."""

from __future__ import annotations

import time
from collections.abc import Callable
from dataclasses import dataclass, field, replace

from .core import Detection
from .io_formats import ResultRecord, SequenceMeta, SubsampleSchedule, subsample
from .tracker import FULL_FREQUENCY, LOW_FREQUENCY, PipelineConfig, StableTracker
from .visual_tracking import ImageFrame


@dataclass
class RunOutput:
    results: list[ResultRecord]
    schedule: SubsampleSchedule
    timings_ms: dict[str, float] = field(default_factory=dict)
    frames_read: list[int] = field(default_factory=list)
    step_ms: list[float] = field(default_factory=list)


def config_for_rate(config: PipelineConfig, meta: SequenceMeta, hz: float | None) -> tuple[PipelineConfig, SubsampleSchedule]:
    """Schedule and config for ``hz`` detections per second (None: every frame)."""
    target = meta.source_fps if hz is None else hz
    schedule = subsample(meta, target)
    if schedule.stride == 1:
        return replace(config, mode=FULL_FREQUENCY, delta_t=1.0 / meta.source_fps), schedule
    return replace(config, mode=LOW_FREQUENCY, delta_t=schedule.stride / meta.source_fps), schedule


def track_sequence(
    meta: SequenceMeta,
    detections: dict[int, list[Detection]],
    load_frame: Callable[[int], ImageFrame],
    hz: float | None = None,
    config: PipelineConfig = PipelineConfig(),
) -> RunOutput:
    """Run the tracker on the scheduled detection frames.

    Args:
        detections: frame -> detections; frames outside the schedule are ignored.
        load_frame: image loader; only scheduled frames (detection and
            intermediate) are requested, and only in low-frequency mode.
        hz: detection rate; None or the source rate runs every frame.
    """
    config, schedule = config_for_rate(config, meta, hz)
    tracker = StableTracker(config)
    low = config.mode == LOW_FREQUENCY
    out = RunOutput([], schedule)
    io_time = 0.0
    cache: dict[int, ImageFrame] = {}

    def frame(k: int) -> ImageFrame:
        nonlocal io_time
        if k not in cache:
            t0 = time.perf_counter()
            cache[k] = load_frame(k)
            io_time += time.perf_counter() - t0
            out.frames_read.append(k)
        return cache[k]

    try:
        for k in schedule.detection_frames:
            t = meta.frame_time(k)
            dets = [Detection(t, d.bbox, d.confidence, d.embedding) for d in detections.get(k, [])]
            frame_t = frame_mid = None
            if low:
                frame_t = frame(k)
                mid = schedule.intermediate_for(k)
                if mid is not None:
                    frame_mid = frame(mid)
            t0 = time.perf_counter()
            rows = tracker.step(dets, t, frame_t, frame_mid)
            out.step_ms.append((time.perf_counter() - t0) * 1e3)
            out.results.extend(ResultRecord(k, r.track_id, r.bbox, r.confidence) for r in rows)
            # keep only the frame the next step tracks from
            for key in [key for key in cache if key != k]:
                del cache[key]
    finally:
        tracker.close()
    out.timings_ms = {name: v * 1e3 for name, v in sorted(tracker.timings.items())}
    out.timings_ms["io"] = io_time * 1e3
    return out
