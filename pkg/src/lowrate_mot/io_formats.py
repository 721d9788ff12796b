"""File formats: MOTChallenge CSVs, EMB1 embedding sidecars, P6 PPM images.

Detection / ground-truth / result files are MOTChallenge text files with
1-indexed frames::

    frame,id,x,y,w,h,conf,a,b,c

Embedding sidecars are binary: the magic ``EMB1``, a little-endian u32
dimension D, then one record of D little-endian float32 per detection in
the order the detections appear in their text file.
"""

from __future__ import annotations

import configparser
import math
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .core import BBox, MalformedInputError
from .visual_tracking import ImageFrame

EMB_MAGIC = b"EMB1"


class ParseError(MalformedInputError):
    """Malformed input file; the message names the offending line or record."""


@dataclass(frozen=True)
class SequenceMeta:
    name: str
    source_fps: float
    width: int
    height: int
    frame_count: int
    im_dir: str = "img1"
    im_ext: str = ".ppm"

    def __post_init__(self):
        if self.source_fps <= 0:
            raise ValueError("source_fps must be positive")
        if self.frame_count < 1:
            raise ValueError("frame_count must be at least 1")

    def frame_time(self, frame: int) -> float:
        return (frame - 1) / self.source_fps

    def image_path(self, seq_dir: Path, frame: int) -> Path:
        return Path(seq_dir) / self.im_dir / f"{frame:06d}{self.im_ext}"


@dataclass(frozen=True)
class SubsampleSchedule:
    detection_frames: list[int]
    intermediate_frames: list[int]
    stride: int

    def intermediate_for(self, frame: int) -> int | None:
        """Intermediate frame preceding detection frame ``frame``."""
        k = self.detection_frames.index(frame)
        return self.intermediate_frames[k - 1] if k > 0 and self.intermediate_frames else None


@dataclass(frozen=True)
class DetRecord:
    frame: int
    bbox: BBox
    confidence: float
    index: int  # position in the file, keys the embedding sidecar


@dataclass(frozen=True)
class GtRecord:
    frame: int
    track_id: int
    bbox: BBox
    visibility: float = 1.0


@dataclass(frozen=True)
class ResultRecord:
    frame: int
    track_id: int
    bbox: BBox
    confidence: float


# ---------------------------------------------------------------------- seqinfo
def read_seqinfo(seq_dir) -> SequenceMeta:
    path = Path(seq_dir) / "seqinfo.ini"
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise ParseError(f"cannot read {path}")
    try:
        s = cp["Sequence"]
        return SequenceMeta(
            name=s.get("name", Path(seq_dir).name),
            source_fps=float(s["frameRate"]),
            width=int(s["imWidth"]),
            height=int(s["imHeight"]),
            frame_count=int(s["seqLength"]),
            im_dir=s.get("imDir", "img1"),
            im_ext=s.get("imExt", ".ppm"),
        )
    except (KeyError, ValueError) as exc:
        raise ParseError(f"{path}: {exc}") from exc


def write_seqinfo(seq_dir, meta: SequenceMeta) -> None:
    fps = int(meta.source_fps) if float(meta.source_fps).is_integer() else meta.source_fps
    text = (
        "[Sequence]\n"
        f"name={meta.name}\n"
        f"imDir={meta.im_dir}\n"
        f"frameRate={fps}\n"
        f"seqLength={meta.frame_count}\n"
        f"imWidth={meta.width}\n"
        f"imHeight={meta.height}\n"
        f"imExt={meta.im_ext}\n"
    )
    Path(seq_dir).mkdir(parents=True, exist_ok=True)
    (Path(seq_dir) / "seqinfo.ini").write_text(text)


# ---------------------------------------------------------------------- CSV
def _rows(path, min_fields: int):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) < min_fields:
            raise ParseError(f"{path}:{lineno}: expected at least {min_fields} fields")
        try:
            vals = [float(p) for p in parts]
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: non-numeric field") from exc
        if not all(math.isfinite(v) for v in vals):
            raise ParseError(f"{path}:{lineno}: non-finite field")
        frame = vals[0]
        if frame != int(frame) or frame < 1:
            raise ParseError(f"{path}:{lineno}: frame must be a positive integer")
        try:
            box = BBox(*vals[2:6])
        except MalformedInputError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from exc
        yield lineno, int(frame), vals, box


def read_detections(path) -> dict[int, list[DetRecord]]:
    """Detections grouped by frame, in file order within each frame."""
    out: dict[int, list[DetRecord]] = {}
    for k, (lineno, frame, vals, box) in enumerate(_rows(path, 7)):
        conf = vals[6]
        if not 0.0 <= conf <= 1.0:
            raise ParseError(f"{path}:{lineno}: confidence {conf} outside [0, 1]")
        out.setdefault(frame, []).append(DetRecord(frame, box, conf, k))
    return dict(sorted(out.items()))


def write_detections(path, dets: Iterable[DetRecord]) -> None:
    lines = [
        f"{d.frame},-1,{d.bbox.x:.2f},{d.bbox.y:.2f},{d.bbox.w:.2f},{d.bbox.h:.2f},{d.confidence:.4f},-1,-1,-1"
        for d in dets
    ]
    Path(path).write_text("".join(line + "\n" for line in lines))


def read_gt(path) -> dict[int, list[GtRecord]]:
    """MOT ground truth; column 9 is visibility when present."""
    out: dict[int, list[GtRecord]] = {}
    for lineno, frame, vals, box in _rows(path, 6):
        tid = vals[1]
        if tid != int(tid):
            raise ParseError(f"{path}:{lineno}: non-integer id")
        vis = vals[8] if len(vals) > 8 else 1.0
        out.setdefault(frame, []).append(GtRecord(frame, int(tid), box, vis))
    return dict(sorted(out.items()))


def write_gt(path, rows: Iterable[GtRecord]) -> None:
    rows = sorted(rows, key=lambda r: (r.frame, r.track_id))
    lines = [
        f"{r.frame},{r.track_id},{r.bbox.x:.2f},{r.bbox.y:.2f},{r.bbox.w:.2f},{r.bbox.h:.2f},1,1,{r.visibility:.3f}"
        for r in rows
    ]
    Path(path).write_text("".join(line + "\n" for line in lines))


def read_results(path) -> dict[int, list[ResultRecord]]:
    out: dict[int, list[ResultRecord]] = {}
    for lineno, frame, vals, box in _rows(path, 6):
        tid = vals[1]
        if tid != int(tid):
            raise ParseError(f"{path}:{lineno}: non-integer id")
        conf = vals[6] if len(vals) > 6 else 1.0
        out.setdefault(frame, []).append(ResultRecord(frame, int(tid), box, conf))
    return dict(sorted(out.items()))


def write_results(path, outputs: Iterable[ResultRecord]) -> None:
    """Results sorted by frame then id, two decimals per float."""
    rows = sorted(outputs, key=lambda r: (r.frame, r.track_id))
    lines = [
        f"{r.frame},{r.track_id},{r.bbox.x:.2f},{r.bbox.y:.2f},{r.bbox.w:.2f},{r.bbox.h:.2f},{r.confidence:.2f},-1,-1,-1"
        for r in rows
    ]
    Path(path).write_text("".join(line + "\n" for line in lines))


# ---------------------------------------------------------------------- embeddings
def write_embeddings(path, embeddings: np.ndarray) -> None:
    emb = np.asarray(embeddings, dtype="<f4")
    if emb.ndim != 2:
        raise ValueError("embeddings must be (N, D)")
    with open(path, "wb") as fh:
        fh.write(EMB_MAGIC)
        fh.write(struct.pack("<I", emb.shape[1]))
        fh.write(emb.tobytes())


def read_embeddings(path, expected_count: int | None = None) -> np.ndarray:
    """Load an EMB1 sidecar as float64 unit vectors, shape (N, D).

    Records off unit norm by more than 1e-3 are renormalized with a warning;
    records with norm below 0.5 are rejected.
    """
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    if len(data) < 8 or data[:4] != EMB_MAGIC:
        raise ParseError(f"{path}: bad magic, expected {EMB_MAGIC!r}")
    (dim,) = struct.unpack("<I", data[4:8])
    if dim == 0:
        raise ParseError(f"{path}: zero embedding dimension")
    payload = len(data) - 8
    rec = 4 * dim
    count, rest = divmod(payload, rec)
    if rest:
        raise ParseError(f"{path}: record {count} is truncated ({rest} of {rec} bytes)")
    if expected_count is not None and count != expected_count:
        raise ParseError(f"{path}: {count} embeddings for {expected_count} detections")
    emb = np.frombuffer(data, dtype="<f4", offset=8).reshape(count, dim).astype(float)
    if not np.all(np.isfinite(emb)):
        raise ParseError(f"{path}: non-finite embedding values")
    norms = np.linalg.norm(emb, axis=1)
    # near-zero vectors carry no direction; anything else is renormalized
    if np.any(norms < 0.5):
        bad = int(np.argmax(norms < 0.5))
        raise ParseError(f"{path}: record {bad} has norm {norms[bad]:.4f}")
    dev = np.abs(norms - 1.0)
    if np.any(dev > 1e-3):
        warnings.warn(f"{path}: {int((dev > 1e-3).sum())} embeddings renormalized", stacklevel=2)
    return emb / norms[:, None] if count else emb


# ---------------------------------------------------------------------- images
def read_image(path) -> ImageFrame:
    """Read a binary P6 PPM (maxval 255); PNG and JPEG go through Pillow if installed."""
    path = Path(path)
    if path.suffix.lower() in (".png", ".jpg", ".jpeg"):
        try:
            from PIL import Image
        except ImportError as exc:  # optional extra
            raise ParseError(f"{path}: reading {path.suffix} needs the 'png' extra (Pillow)") from exc
        with Image.open(path) as im:
            return ImageFrame(np.asarray(im.convert("RGB"), dtype=np.uint8).copy())
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    return parse_ppm(data, str(path))


def parse_ppm(data: bytes, name: str = "<ppm>") -> ImageFrame:
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise ParseError(f"{name}: truncated header")
        tokens.append(data[start:pos])
    if tokens[0] != b"P6":
        raise ParseError(f"{name}: unsupported format {tokens[0]!r}, expected P6")
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise ParseError(f"{name}: malformed header") from exc
    if maxval != 255:
        raise ParseError(f"{name}: unsupported maxval {maxval}")
    if w < 1 or h < 1:
        raise ParseError(f"{name}: bad dimensions {w}x{h}")
    pos += 1  # single whitespace byte after maxval
    payload = data[pos:]
    if len(payload) != w * h * 3:
        raise ParseError(f"{name}: payload is {len(payload)} bytes, expected {w * h * 3}")
    return ImageFrame(np.frombuffer(payload, dtype=np.uint8).reshape(h, w, 3).copy())


def write_image(path, frame: ImageFrame) -> None:
    header = f"P6\n{frame.width} {frame.height}\n255\n".encode()
    Path(path).write_bytes(header + np.ascontiguousarray(frame.pixels).tobytes())


# ---------------------------------------------------------------------- subsampling
def stride_for(source_fps: float, target_hz: float) -> int:
    if target_hz <= 0:
        raise ValueError("target rate must be positive")
    if target_hz > source_fps + 1e-9:
        raise ValueError(f"target rate {target_hz} Hz exceeds source {source_fps} FPS")
    return max(1, int(math.floor(source_fps / target_hz + 0.5)))


def subsample(meta: SequenceMeta, target_hz: float) -> SubsampleSchedule:
    """Detection frames every round(fps / hz) frames from frame 1, plus floor midpoints."""
    stride = stride_for(meta.source_fps, target_hz)
    dets = list(range(1, meta.frame_count + 1, stride))
    mids = [(a + b) // 2 for a, b in zip(dets, dets[1:])] if stride > 1 else []
    return SubsampleSchedule(dets, mids, stride)
