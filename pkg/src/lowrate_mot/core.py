"""Geometric and appearance primitives shared by the whole tracker."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class MalformedInputError(ValueError):
    """Raised when an input value violates a structural precondition."""


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in pixels, stored as (left, top, width, height)."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        vals = (self.x, self.y, self.w, self.h)
        if not all(math.isfinite(v) for v in vals):
            raise MalformedInputError(f"non-finite box {vals}")
        if self.w <= 0 or self.h <= 0:
            raise MalformedInputError(f"degenerate box w={self.w} h={self.h}")

    @classmethod
    def from_center(cls, cx: float, cy: float, w: float, h: float) -> "BBox":
        return cls(cx - w / 2.0, cy - h / 2.0, w, h)

    @property
    def center(self) -> tuple[float, float]:
        return center(self)

    def to_xywh(self) -> np.ndarray:
        return np.array([self.x, self.y, self.w, self.h], dtype=float)

    def to_cxcywh(self) -> np.ndarray:
        return np.array([self.x + self.w / 2.0, self.y + self.h / 2.0, self.w, self.h])

    def translate(self, dx: float, dy: float) -> "BBox":
        return BBox(self.x + dx, self.y + dy, self.w, self.h)

    @property
    def area(self) -> float:
        return self.w * self.h


@dataclass(frozen=True, eq=False)
class Detection:
    """A detector output at one time instant.

    Attributes:
        frame_time: Video time of the frame in seconds.
        bbox: Detected box.
        confidence: Detector score in [0, 1].
        embedding: Unit-norm appearance vector.
    """

    frame_time: float
    bbox: BBox
    confidence: float
    embedding: np.ndarray

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise MalformedInputError(f"confidence {self.confidence} outside [0, 1]")
        if self.frame_time < 0:
            raise MalformedInputError(f"negative frame time {self.frame_time}")
        emb = np.asarray(self.embedding, dtype=float)
        if emb.ndim != 1:
            raise MalformedInputError("embedding must be a vector")
        if abs(np.linalg.norm(emb) - 1.0) > 1e-6:
            raise MalformedInputError("embedding is not unit-norm")
        object.__setattr__(self, "embedding", emb)


def center(b: BBox) -> tuple[float, float]:
    return (b.x + b.w / 2.0, b.y + b.h / 2.0)


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union of two boxes; 0 for disjoint interiors."""
    iw = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    ih = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    # rounding in the edge arithmetic can push identical boxes past 1
    return min(inter / (a.w * a.h + b.w * b.h - inter), 1.0)


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU between (N, 4) and (M, 4) arrays of xywh boxes."""
    a = np.asarray(a, dtype=float).reshape(-1, 4)
    b = np.asarray(b, dtype=float).reshape(-1, 4)
    ax2 = a[:, 0] + a[:, 2]
    ay2 = a[:, 1] + a[:, 3]
    bx2 = b[:, 0] + b[:, 2]
    by2 = b[:, 1] + b[:, 3]
    iw = np.minimum(ax2[:, None], bx2[None, :]) - np.maximum(a[:, 0][:, None], b[:, 0][None, :])
    ih = np.minimum(ay2[:, None], by2[None, :]) - np.maximum(a[:, 1][:, None], b[:, 1][None, :])
    inter = np.clip(iw, 0, None) * np.clip(ih, 0, None)
    union = (a[:, 2] * a[:, 3])[:, None] + (b[:, 2] * b[:, 3])[None, :] - inter
    return np.minimum(inter / union, 1.0)


def normalize(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n == 0 or not np.isfinite(n):
        raise MalformedInputError("cannot normalize a zero or non-finite vector")
    return v / n


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Dot product of two unit embeddings."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise MalformedInputError(f"embedding shape mismatch {a.shape} vs {b.shape}")
    return float(np.clip(a @ b, -1.0, 1.0))


def similarity_matrix(track_embs: np.ndarray, det_embs: np.ndarray) -> np.ndarray:
    """Cosine similarities between (N, D) and (M, D) unit embeddings."""
    track_embs = np.asarray(track_embs, dtype=float)
    det_embs = np.asarray(det_embs, dtype=float)
    if track_embs.size == 0 or det_embs.size == 0:
        return np.zeros((len(track_embs), len(det_embs)))
    if track_embs.shape[1] != det_embs.shape[1]:
        raise MalformedInputError("embedding dimension mismatch")
    return np.clip(track_embs @ det_embs.T, -1.0, 1.0)
