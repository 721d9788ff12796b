"""Synthetic tracking sequences with exact ground truth.

Targets are solid-color rectangles on a flat background. Detections are the
ground-truth boxes plus jitter, thinned by a miss rate and padded with false
positives. Every target has a mean appearance direction; detection
embeddings scatter around it so that same-identity cosine similarity sits
near 1 and cross-identity similarity near 0 (or near a chosen value for
look-alike "clone" targets).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .core import BBox, Detection
from .io_formats import DetRecord, GtRecord, ResultRecord, SequenceMeta
from .visual_tracking import ImageFrame

KINDS = ("linear", "sinusoidal", "crossing", "stop_and_go", "accelerating")


class ScenarioError(ValueError):
    """Inconsistent scenario description."""


@dataclass
class TargetSpec:
    """One moving rectangle. Positions are box centers in pixels, speeds in px/s."""

    kind: str = "linear"
    size: tuple[float, float] = (20.0, 40.0)
    color: tuple[int, int, int] = (200, 40, 40)
    embedding_seed: int = 0
    start: tuple[float, float] = (100.0, 100.0)
    velocity: tuple[float, float] = (40.0, 0.0)
    end: tuple[float, float] | None = None  # crossing: straight run from start to end
    amplitude: float = 0.0  # sinusoidal: lateral swing
    period: float = 2.0  # sinusoidal period, or stop-and-go cycle length
    acceleration: tuple[float, float] = (0.0, 0.0)
    appear: float = 0.0
    disappear: float | None = None


@dataclass
class OccluderSpec:
    rect: tuple[float, float, float, float]
    start: float = 0.0
    stop: float = math.inf
    color: tuple[int, int, int] = (60, 60, 60)


@dataclass
class NoiseSpec:
    bbox_jitter: float = 0.0
    embedding_noise: float = 0.3
    miss_rate: float = 0.0
    fp_rate: float = 0.0


@dataclass
class ScenarioSpec:
    name: str = "synthetic"
    width: int = 640
    height: int = 480
    duration: float = 10.0
    fps: float = 30.0
    targets: list[TargetSpec] = field(default_factory=list)
    occluders: list[OccluderSpec] = field(default_factory=list)
    camera_pan: tuple[float, float] | None = None
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    seed: int = 0
    embedding_dim: int = 128
    clone_similarity: float | None = None
    clone_confusion: float = 0.0
    min_visibility: float = 0.4
    background: tuple[int, int, int] = (128, 128, 128)

    def __post_init__(self):
        if self.fps <= 0:
            raise ScenarioError("fps must be positive")
        if self.duration <= 0:
            raise ScenarioError("duration must be positive")
        n = self.noise
        for name in ("miss_rate", "fp_rate"):
            if not 0.0 <= getattr(n, name) < 1.0:
                raise ScenarioError(f"{name} must lie in [0, 1)")
        for k, t in enumerate(self.targets):
            if t.kind not in KINDS:
                raise ScenarioError(f"target {k}: unknown kind {t.kind!r}")
            if t.size[0] <= 0 or t.size[1] <= 0:
                raise ScenarioError(f"target {k}: size must be positive")
            if t.size[0] >= self.width or t.size[1] >= self.height:
                raise ScenarioError(f"target {k} is larger than the arena")
            if t.kind == "crossing" and t.end is None:
                raise ScenarioError(f"target {k}: crossing needs an end point")
        if self.clone_similarity is not None and not 0 < self.clone_similarity < 1:
            raise ScenarioError("clone_similarity must lie in (0, 1)")

    @property
    def frame_count(self) -> int:
        return int(round(self.duration * self.fps)) + 1

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, default=_json_default)

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        d = dict(d)
        d["targets"] = [TargetSpec(**_tuples(t)) for t in d.get("targets", [])]
        d["occluders"] = [OccluderSpec(**_tuples(o)) for o in d.get("occluders", [])]
        d["noise"] = NoiseSpec(**d.get("noise", {}))
        return cls(**_tuples(d))

    @classmethod
    def from_json(cls, path) -> "ScenarioSpec":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (TypeError, json.JSONDecodeError) as exc:
            raise ScenarioError(f"{path}: {exc}") from exc


def _json_default(o):
    if o == math.inf:
        return 1e308
    raise TypeError(o)


def _tuples(d: dict) -> dict:
    return {k: tuple(v) if isinstance(v, list) and k not in ("targets", "occluders") else v for k, v in d.items()}


@dataclass(frozen=True, eq=False)
class SynthDetection:
    frame: int
    bbox: BBox
    confidence: float
    embedding: np.ndarray
    gt_id: int  # -1 for false positives

    def to_detection(self, frame_time: float) -> Detection:
        return Detection(frame_time, self.bbox, self.confidence, self.embedding)


@dataclass(eq=False)
class SynthSequence:
    spec: ScenarioSpec
    meta: SequenceMeta
    gt: list[GtRecord]
    detections: list[SynthDetection]

    def frame(self, k: int) -> ImageFrame:
        """Rendered image of 1-indexed frame ``k``."""
        return ImageFrame(_render(self.spec, (k - 1) / self.spec.fps)[0])

    def frame_time(self, k: int) -> float:
        return (k - 1) / self.spec.fps

    def detections_by_frame(self) -> dict[int, list[SynthDetection]]:
        out: dict[int, list[SynthDetection]] = {}
        for d in self.detections:
            out.setdefault(d.frame, []).append(d)
        return out

    def gt_by_frame(self) -> dict[int, list[GtRecord]]:
        out: dict[int, list[GtRecord]] = {}
        for g in self.gt:
            out.setdefault(g.frame, []).append(g)
        return out

    def det_records(self) -> list[DetRecord]:
        return [DetRecord(d.frame, d.bbox, d.confidence, k) for k, d in enumerate(self.detections)]

    def embedding_matrix(self) -> np.ndarray:
        if not self.detections:
            return np.zeros((0, self.spec.embedding_dim))
        return np.stack([d.embedding for d in self.detections])


# ---------------------------------------------------------------------- motion
def _fold(v: float, lo: float, hi: float) -> float:
    """Reflect ``v`` into [lo, hi] as if bouncing off both walls."""
    span = hi - lo
    if span <= 0:
        return lo
    u = (v - lo) % (2 * span)
    return lo + (u if u <= span else 2 * span - u)


def target_center(t: TargetSpec, time: float, spec: ScenarioSpec) -> tuple[float, float]:
    """World-frame center at ``time`` seconds (before camera pan)."""
    (x0, y0), (vx, vy) = t.start, t.velocity
    if t.kind == "crossing":
        (x1, y1) = t.end
        a = min(max(time / spec.duration, 0.0), 1.0)
        return x0 + (x1 - x0) * a, y0 + (y1 - y0) * a
    if t.kind == "linear":
        x, y = x0 + vx * time, y0 + vy * time
    elif t.kind == "sinusoidal":
        speed = math.hypot(vx, vy) or 1.0
        nx, ny = -vy / speed, vx / speed
        s = t.amplitude * math.sin(2 * math.pi * time / t.period)
        x, y = x0 + vx * time + nx * s, y0 + vy * time + ny * s
    elif t.kind == "stop_and_go":
        half = t.period / 2.0
        cycles, rem = divmod(time, t.period)
        moving = cycles * half + min(rem, half)
        x, y = x0 + vx * moving, y0 + vy * moving
    else:  # accelerating
        ax, ay = t.acceleration
        x, y = x0 + vx * time + 0.5 * ax * time**2, y0 + vy * time + 0.5 * ay * time**2
    w, h = t.size
    return _fold(x, w / 2, spec.width - w / 2), _fold(y, h / 2, spec.height - h / 2)


def _pan(spec: ScenarioSpec, time: float) -> tuple[float, float]:
    if spec.camera_pan is None:
        return 0.0, 0.0
    return -spec.camera_pan[0] * time, -spec.camera_pan[1] * time


def _alive(t: TargetSpec, time: float) -> bool:
    return time >= t.appear and (t.disappear is None or time < t.disappear)


def target_boxes(spec: ScenarioSpec, time: float) -> list[tuple[int, BBox]]:
    """(gt id, image-frame box) of every live target; ids are 1-based target positions."""
    px, py = _pan(spec, time)
    out = []
    for k, t in enumerate(spec.targets):
        if _alive(t, time):
            cx, cy = target_center(t, time, spec)
            out.append((k + 1, BBox.from_center(cx + px, cy + py, *t.size)))
    return out


def _span(a: float, length: float, limit: int) -> tuple[int, int]:
    # pixel i is covered when its center i + 0.5 lies in [a, a + length)
    lo = max(math.ceil(a - 0.5), 0)
    hi = min(math.ceil(a + length - 0.5), limit)
    return lo, hi


def _render(spec: ScenarioSpec, time: float) -> tuple[np.ndarray, np.ndarray, list[tuple[int, BBox]]]:
    img = np.empty((spec.height, spec.width, 3), dtype=np.uint8)
    img[:] = spec.background
    label = np.zeros((spec.height, spec.width), dtype=np.int32)
    boxes = target_boxes(spec, time)
    for gid, b in boxes:
        x0, x1 = _span(b.x, b.w, spec.width)
        y0, y1 = _span(b.y, b.h, spec.height)
        if x1 > x0 and y1 > y0:
            img[y0:y1, x0:x1] = spec.targets[gid - 1].color
            label[y0:y1, x0:x1] = gid
    px, py = _pan(spec, time)
    for o in spec.occluders:
        if o.start <= time < o.stop:
            x, y, w, h = o.rect
            x0, x1 = _span(x + px, w, spec.width)
            y0, y1 = _span(y + py, h, spec.height)
            if x1 > x0 and y1 > y0:
                img[y0:y1, x0:x1] = o.color
                label[y0:y1, x0:x1] = -1
    return img, label, boxes


# ---------------------------------------------------------------------- appearance
def _unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


class _Appearance:
    def __init__(self, spec: ScenarioSpec):
        dim = spec.embedding_dim
        self.dim = dim
        self.spec = spec
        self.own = [_unit(np.random.default_rng([7, t.embedding_seed]), dim) for t in spec.targets]
        if spec.clone_similarity is not None:
            self.base = _unit(np.random.default_rng([11, spec.seed]), dim)
            self.delta = math.sqrt(1.0 / spec.clone_similarity - 1.0)
            self.means = [_normalize(self.base + self.delta * u) for u in self.own]
        else:
            self.means = self.own

    def sample(self, gid: int, rng: np.random.Generator) -> np.ndarray:
        spec = self.spec
        sigma = spec.noise.embedding_noise
        noise = sigma * rng.standard_normal(self.dim) / math.sqrt(self.dim)
        if spec.clone_similarity is not None:
            mix = self.own[gid - 1].copy()
            if spec.clone_confusion > 0:
                weights = rng.standard_normal(len(self.own))
                mix = mix + spec.clone_confusion * np.tensordot(weights, np.array(self.own), axes=1)
            return _normalize(self.base + self.delta * mix + noise)
        return _normalize(self.means[gid - 1] + noise)


def _normalize(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


# ---------------------------------------------------------------------- generation
def generate(spec: ScenarioSpec) -> SynthSequence:
    """Ground truth and detections of a scenario; frames render on demand."""
    rng = np.random.default_rng(spec.seed)
    app = _Appearance(spec)
    n = spec.frame_count
    meta = SequenceMeta(spec.name, spec.fps, spec.width, spec.height, n)
    gt: list[GtRecord] = []
    dets: list[SynthDetection] = []
    sizes = [t.size for t in spec.targets] or [(20.0, 40.0)]
    jitter = spec.noise.bbox_jitter
    for k in range(1, n + 1):
        time = (k - 1) / spec.fps
        _, label, boxes = _render(spec, time)
        for gid, b in boxes:
            x0, x1 = _span(b.x, b.w, spec.width)
            y0, y1 = _span(b.y, b.h, spec.height)
            full = max(_span(b.x, b.w, 1 << 30)[1] - _span(b.x, b.w, 1 << 30)[0], 1) * max(
                _span(b.y, b.h, 1 << 30)[1] - _span(b.y, b.h, 1 << 30)[0], 1
            )
            seen = int((label[y0:y1, x0:x1] == gid).sum()) if x1 > x0 and y1 > y0 else 0
            vis = seen / full
            gt.append(GtRecord(k, gid, b, vis))
            if vis < spec.min_visibility:
                continue
            if spec.noise.miss_rate > 0 and rng.random() < spec.noise.miss_rate:
                continue
            box = b
            if jitter > 0:
                dx, dy, dw, dh = rng.normal(0.0, jitter, 4)
                box = BBox(b.x + dx, b.y + dy, max(b.w + dw, 2.0), max(b.h + dh, 2.0))
            dets.append(SynthDetection(k, box, 0.9, app.sample(gid, rng), gid))
        if spec.noise.fp_rate > 0 and rng.random() < spec.noise.fp_rate:
            w, h = sizes[int(rng.integers(len(sizes)))]
            x = rng.uniform(0, spec.width - w)
            y = rng.uniform(0, spec.height - h)
            conf = float(rng.uniform(0.3, 0.8))
            dets.append(SynthDetection(k, BBox(x, y, w, h), conf, _unit(rng, spec.embedding_dim), -1))
    return SynthSequence(spec, meta, gt, dets)


def oracle_tracks(gt: list[GtRecord], detections: list[SynthDetection]) -> list[ResultRecord]:
    """ID-perfect tracking of the detections; false positives get fresh ids."""
    next_id = max((g.track_id for g in gt), default=0) + 1
    out = []
    for d in detections:
        gid = getattr(d, "gt_id", None)
        if gid is None:
            raise ScenarioError("detection carries no ground-truth provenance")
        if gid < 0:
            gid = next_id
            next_id += 1
        out.append(ResultRecord(d.frame, gid, d.bbox, d.confidence))
    return out


# ---------------------------------------------------------------------- presets
def crossing_preset(seed: int = 0, duration: float = 10.0, fps: float = 30.0) -> ScenarioSpec:
    """Two distinct targets running straight at each other along the same row."""
    return ScenarioSpec(
        name="crossing",
        duration=duration,
        fps=fps,
        seed=seed,
        targets=[
            TargetSpec(kind="crossing", size=(30, 60), color=(220, 40, 40), embedding_seed=1,
                       start=(80.0, 240.0), end=(560.0, 240.0)),
            TargetSpec(kind="crossing", size=(30, 60), color=(40, 60, 220), embedding_seed=2,
                       start=(560.0, 250.0), end=(80.0, 250.0)),
        ],
        noise=NoiseSpec(embedding_noise=0.0),
    )


def clone_preset(seed: int = 0, n_targets: int = 8, duration: float = 20.0, fps: float = 30.0) -> ScenarioSpec:
    """Look-alike dancers: same color, near-identical appearance, swaying motion.

    Targets share one color and embeddings whose cross-id cosine is about
    0.9, with per-detection noise along the other targets' directions, so
    appearance alone often prefers the wrong identity. They are scattered
    over the arena, so spatial plausibility separates most of them, and two
    pillars hide them for a second or two as they pass.
    """
    rng = np.random.default_rng([3, seed])
    targets = []
    for k in range(n_targets):
        angle = rng.uniform(0, 2 * np.pi)
        speed = rng.uniform(10, 25)
        targets.append(TargetSpec(
            kind="sinusoidal",
            size=(20.0, 44.0),
            color=(200, 170, 60),
            embedding_seed=100 * seed + k,
            start=(float(rng.uniform(20, 620)), float(rng.uniform(30, 450))),
            velocity=(float(speed * np.cos(angle)), float(speed * np.sin(angle))),
            amplitude=float(rng.uniform(10, 20)),
            period=float(rng.uniform(3.0, 5.0)),
        ))
    return ScenarioSpec(
        name="clone",
        duration=duration,
        fps=fps,
        seed=seed,
        targets=targets,
        occluders=[OccluderSpec((200.0, 0.0, 36.0, 480.0)), OccluderSpec((420.0, 0.0, 36.0, 480.0))],
        clone_similarity=0.9,
        clone_confusion=0.45,
        noise=NoiseSpec(bbox_jitter=1.0, embedding_noise=0.3),
    )


def accelerating_preset(seed: int = 0, duration: float = 3.0, fps: float = 30.0) -> ScenarioSpec:
    """One target speeding up from rest with a random heading."""
    rng = np.random.default_rng([5, seed])
    angle = rng.uniform(0, 2 * np.pi)
    acc = float(rng.uniform(20, 40))
    return ScenarioSpec(
        name="accelerating",
        duration=duration,
        fps=fps,
        seed=seed,
        targets=[TargetSpec(
            kind="accelerating", size=(30.0, 60.0), color=(40, 200, 80), embedding_seed=seed,
            start=(320.0 + rng.uniform(-40, 40), 240.0 + rng.uniform(-40, 40)),
            velocity=(0.0, 0.0),
            acceleration=(acc * float(np.cos(angle)), acc * float(np.sin(angle))),
        )],
        noise=NoiseSpec(embedding_noise=0.0),
    )


def crowd_preset(seed: int = 0, n_targets: int = 50, duration: float = 4.0, fps: float = 30.0) -> ScenarioSpec:
    """Many small distinct targets on linear paths, for throughput checks."""
    rng = np.random.default_rng([9, seed])
    targets = [
        TargetSpec(
            kind="linear", size=(16.0, 32.0),
            color=tuple(int(c) for c in rng.integers(0, 256, 3)),
            embedding_seed=1000 * seed + k,
            start=(float(rng.uniform(20, 620)), float(rng.uniform(30, 450))),
            velocity=(float(rng.uniform(-30, 30)), float(rng.uniform(-30, 30))),
        )
        for k in range(n_targets)
    ]
    return ScenarioSpec(name="crowd", duration=duration, fps=fps, seed=seed, targets=targets,
                        min_visibility=0.0)


PRESETS = {
    "crossing": crossing_preset,
    "clone": clone_preset,
    "accelerating": accelerating_preset,
    "crowd": crowd_preset,
}
