"""Quality gating: which detections may enroll or verify identities."""

from __future__ import annotations

from enum import Enum

from .core import Config, QualityAttrs, QualityGate


class QualityClass(Enum):
    DISCARDED = "discarded"
    VERIFIABLE = "verifiable"
    ENROLLABLE = "enrollable"


def passes_gate(q: QualityAttrs, gate: QualityGate) -> bool:
    """All bounds are inclusive; the angle bound applies to yaw, pitch and roll."""
    return (
        q.det_confidence >= gate.min_confidence
        and abs(q.yaw) <= gate.max_angle_deg
        and abs(q.pitch) <= gate.max_angle_deg
        and abs(q.roll) <= gate.max_angle_deg
        and q.sharpness >= gate.min_sharpness
    )


def classify(q: QualityAttrs, cfg: Config) -> QualityClass:
    """Sort a detection into enrollable / verifiable / discarded.

    The enroll gate is strictly tighter than the verify gate in any sane
    configuration, so enrollable detections always verify too.
    """
    if passes_gate(q, cfg.enroll_gate) and passes_gate(q, cfg.verify_gate):
        return QualityClass.ENROLLABLE
    if passes_gate(q, cfg.verify_gate):
        return QualityClass.VERIFIABLE
    return QualityClass.DISCARDED
