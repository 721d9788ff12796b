"""Multi-object tracking for sparse, low-frequency detections."""

from .assignment import solve
from .association import AssociationConfig, associate
from .bbd import BbdParams, bbd, bbd_matrix, gating_covariance
from .core import BBox, Detection, MalformedInputError, cosine_similarity, iou
from .kalman import KalmanModel, KalmanState
from .metrics import clear_metrics, evaluate, hota, idf1
from .runner import track_sequence
from .synth import ScenarioSpec, TargetSpec, generate, oracle_tracks
from .tracker import PipelineConfig, StableTracker
from .visual_tracking import ImageFrame, VtParams

__version__ = "0.1.0"

__all__ = [
    "AssociationConfig", "BBox", "BbdParams", "Detection", "ImageFrame", "KalmanModel", "KalmanState",
    "MalformedInputError", "PipelineConfig", "ScenarioSpec", "StableTracker", "TargetSpec", "VtParams",
    "associate", "bbd", "bbd_matrix", "clear_metrics", "cosine_similarity", "evaluate", "gating_covariance",
    "generate", "hota", "idf1", "iou", "oracle_tracks", "solve", "track_sequence",
]
