"""Per-frame matching of predicted track boxes to detected boxes.

Costs are 1 - IOU, solved as a rectangular linear assignment; pairs whose
IOU falls below the acceptance threshold are demoted to unmatched on both
sides after the global solve.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import BBox


@dataclass(frozen=True)
class Assignment:
    pairs: list[tuple[int, int]]
    unmatched_tracklets: list[int]
    unmatched_detections: list[int]


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union of two boxes; 0 when disjoint."""
    left = max(a.x, b.x)
    top = max(a.y, b.y)
    right = min(a.x + a.w, b.x + b.w)
    bottom = min(a.y + a.h, b.y + b.h)
    iw = right - left
    ih = bottom - top
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def iou_matrix(rows: Sequence[BBox], cols: Sequence[BBox]) -> np.ndarray:
    out = np.zeros((len(rows), len(cols)), dtype=np.float64)
    for i, a in enumerate(rows):
        for j, b in enumerate(cols):
            out[i, j] = iou(a, b)
    return out


def hungarian(cost) -> list[tuple[int, int]]:
    """Minimal-cost one-to-one assignment on a rectangular cost matrix.

    Returns min(K, N) (row, col) pairs sorted by row. Empty matrices give an
    empty assignment.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise ValueError(f"cost must be a 2-d matrix, got shape {cost.shape}")
    if cost.size == 0:
        return []
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix entries must be finite")
    rows, cols = linear_sum_assignment(cost)
    return sorted(zip(rows.tolist(), cols.tolist()))


def associate(
    predicted: Sequence[BBox],
    detected: Sequence[BBox],
    iou_threshold: float,
) -> Assignment:
    """Match predicted track boxes against detections of one frame.

    A produced pair is kept only when its IOU is at or above the threshold;
    demoted pairs leave both sides unmatched, and unmatched detections are
    the caller's cue to start new tracks.
    """
    if not predicted or not detected:
        return Assignment([], list(range(len(predicted))), list(range(len(detected))))
    overlap = iou_matrix(predicted, detected)
    raw = hungarian(1.0 - overlap)
    pairs = [(i, j) for i, j in raw if overlap[i, j] >= iou_threshold]
    matched_rows = {i for i, _ in pairs}
    matched_cols = {j for _, j in pairs}
    return Assignment(
        pairs=pairs,
        unmatched_tracklets=[i for i in range(len(predicted)) if i not in matched_rows],
        unmatched_detections=[j for j in range(len(detected)) if j not in matched_cols],
    )
