"""Domain types and the tracklet lifecycle shared by the whole engine."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class TrackStatus(Enum):
    ACTIVE = "active"
    COASTING = "coasting"
    DEAD = "dead"


class ReconnectMode(Enum):
    OFF = "off"
    SIMPLE = "simplified"
    RANKED = "rank"


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box: top-left corner plus size, in pixels."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.w, self.h)):
            raise ValueError(f"box coordinates must be finite, got {self}")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box width/height must be positive, got {self}")

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    @property
    def area(self) -> float:
        return self.w * self.h


class Embedding:
    """Appearance vector, forced to unit L2 norm on construction."""

    __slots__ = ("values",)

    def __init__(self, values):
        v = np.asarray(values, dtype=np.float64)
        if v.ndim != 1 or v.size == 0:
            raise ValueError("embedding must be a nonempty 1-d vector")
        if not np.all(np.isfinite(v)):
            raise ValueError("embedding components must be finite")
        norm = float(np.linalg.norm(v))
        if norm == 0.0:
            raise ValueError("embedding must be nonzero")
        v = v / norm
        v.setflags(write=False)
        self.values = v

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    def __repr__(self):
        return f"Embedding(dim={self.dim})"


@dataclass(frozen=True)
class QualityAttrs:
    """Per-detection image quality indicators."""

    det_confidence: float
    yaw: float
    pitch: float
    roll: float
    sharpness: float

    def __post_init__(self):
        vals = (self.det_confidence, self.yaw, self.pitch, self.roll, self.sharpness)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"quality attributes must be finite, got {self}")
        if not 0.0 <= self.det_confidence <= 1.0:
            raise ValueError(f"det_confidence must be in [0, 1], got {self.det_confidence}")
        if not 0.0 <= self.sharpness <= 1.0:
            raise ValueError(f"sharpness must be in [0, 1], got {self.sharpness}")


@dataclass(frozen=True)
class Detection:
    """One observed face instance in one frame."""

    frame: int
    det_id: int
    box: BBox
    embedding: Embedding
    quality: QualityAttrs
    gt_id: int | None = None

    def __post_init__(self):
        if self.frame < 0:
            raise ValueError(f"frame index must be non-negative, got {self.frame}")


@dataclass(frozen=True)
class QualityGate:
    """Lower/upper bounds a detection must meet to enter a template store."""

    min_confidence: float
    max_angle_deg: float
    min_sharpness: float


@dataclass
class Config:
    """Run configuration. Defaults match the engine's tuned operating point."""

    iou_threshold: float = 0.25
    # threshold applied to the top gallery similarity; the ranked mode can
    # afford a permissive value because the margin check does the filtering
    reconnect_threshold: float = 0.5
    simple_reconnect_threshold: float = 0.7
    # top similarity must be at least mean(next margin_ranks) / margin_ratio
    margin_ratio: float = 0.8
    margin_ranks: int = 6
    max_coast_frames: int = 30
    enroll_gate: QualityGate = field(
        default_factory=lambda: QualityGate(0.95, 25.0, 0.9)
    )
    verify_gate: QualityGate = field(
        default_factory=lambda: QualityGate(0.8, 60.0, 0.75)
    )
    reconnect_mode: ReconnectMode = ReconnectMode.RANKED
    motion_enabled: bool = True
    correction_enabled: bool = True
    predictor: str = "kalman"
    embedding_dim: int = 128

    def __post_init__(self):
        if not 0.0 <= self.reconnect_threshold <= 1.0:
            raise ValueError("reconnect_threshold must be in [0, 1]")
        if not 0.0 < self.margin_ratio <= 1.0:
            raise ValueError("margin_ratio must be in (0, 1]")
        if self.margin_ranks < 1:
            raise ValueError("margin_ranks must be >= 1")
        if self.max_coast_frames < 1:
            raise ValueError("max_coast_frames must be >= 1")
        if isinstance(self.reconnect_mode, str):
            self.reconnect_mode = ReconnectMode(self.reconnect_mode)


class Tracklet:
    """One identity hypothesis: detection history, template stores, motion state.

    Template stores hold raw unit vectors. Every enrollable template is also
    appended to the verifiable store, so enrollable-qualifying detections
    always contribute to both.
    """

    __slots__ = (
        "id",
        "status",
        "last_update_frame",
        "coast_count",
        "predictor",
        "enrollables",
        "verifiables",
        "detections",
        "last_box",
        "enroll_version",
    )

    def __init__(self, track_id: int, frame: int, predictor, box: BBox | None):
        self.id = track_id
        self.status = TrackStatus.ACTIVE
        self.last_update_frame = frame
        self.coast_count = 0
        self.predictor = predictor
        self.enrollables: list[np.ndarray] = []
        self.verifiables: list[np.ndarray] = []
        self.detections: list[int] = []
        self.last_box = box
        # bumped whenever the enrollable store changes; used as a cache key
        self.enroll_version = 0

    @property
    def alive(self) -> bool:
        return self.status is not TrackStatus.DEAD

    def add_enrollable(self, values: np.ndarray) -> None:
        self.enrollables.append(values)
        self.verifiables.append(values)
        self.enroll_version += 1

    def add_verifiable(self, values: np.ndarray) -> None:
        self.verifiables.append(values)

    def __repr__(self):
        return (
            f"Tracklet(id={self.id}, status={self.status.value}, "
            f"dets={len(self.detections)}, coast={self.coast_count})"
        )


def tracklet_new(track_id: int, detection: Detection, predictor) -> Tracklet:
    """Start a fresh tracklet from its first detection.

    Template stores start empty; the quality gate decides separately whether
    the detection contributes templates.
    """
    t = Tracklet(track_id, detection.frame, predictor, detection.box)
    t.detections.append(detection.det_id)
    return t


def tracklet_step(
    t: Tracklet,
    assigned: Detection | None,
    frame: int,
    max_coast_frames: int,
) -> Tracklet:
    """Advance the lifecycle of one tracklet for one frame.

    With a detection the tracklet becomes active and its predictor is
    corrected with the observed box. Without one it coasts; once it has
    already coasted ``max_coast_frames`` frames the next miss kills it.
    Callers advance the motion predictor once per frame before stepping.
    """
    if t.status is TrackStatus.DEAD:
        raise RuntimeError(f"cannot step dead tracklet {t.id}")
    if assigned is not None:
        t.predictor.correct(assigned.box)
        t.status = TrackStatus.ACTIVE
        t.coast_count = 0
        t.detections.append(assigned.det_id)
        t.last_box = assigned.box
        t.last_update_frame = frame
    else:
        if t.coast_count >= max_coast_frames:
            t.status = TrackStatus.DEAD
        else:
            t.coast_count += 1
            t.status = TrackStatus.COASTING
    return t
