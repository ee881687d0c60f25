"""The frame loop: association, lifecycle, quality gating, reconnection.

Per frame the engine predicts live track boxes (when motion prediction is
on), solves the IOU assignment, steps matched and missed tracklets, starts
new tracklets on unmatched detections, files templates through the quality
gates, and finally lets every tracklet whose detection verified this frame
query the gallery for a reconnection. Fusions re-emit the current detection
under the surviving id and feed the correction record.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from itertools import count, groupby
from typing import Iterable

from .assoc import associate
from .core import Config, Detection, ReconnectMode, Tracklet, TrackStatus, tracklet_new, tracklet_step
from .correction import TrackRecord
from .metrics import EvalRecord, EvalReport, evaluate
from .motion import make_predictor
from .quality import QualityClass, classify
from .reconnect import (
    Gallery,
    JoinPair,
    ReconnectionDecision,
    ReconnectOutcome,
    try_reconnect,
)
from .sim import GhostTracklet


@dataclass(frozen=True)
class FusionAudit:
    """Bookkeeping snapshot taken when a fusion is applied."""

    pair: JoinPair
    absorbed_majority_gt: int | None
    surviving_majority_gt: int | None

    @property
    def wrong(self) -> bool:
        """A fusion joining tracks whose majority ground truths differ."""
        return self.absorbed_majority_gt != self.surviving_majority_gt


class TrackingEngine:
    """Stateful tracker consuming a frame-ordered detection stream."""

    def __init__(self, cfg: Config, ghosts: Iterable[GhostTracklet] = ()):
        self.cfg = cfg
        self.tracklets: dict[int, Tracklet] = {}
        self.gallery = Gallery(cfg.embedding_dim)
        self.record = TrackRecord()
        self.joins: list[JoinPair] = []
        self.decisions: list[ReconnectionDecision] = []
        self.fusion_audits: list[FusionAudit] = []
        self._ids = count(1)
        self._gt_of_det: dict[int, int | None] = {}
        self.frames_processed = 0
        for ghost in ghosts:
            t = Tracklet(next(self._ids), frame=0, predictor=None, box=None)
            t.status = TrackStatus.DEAD
            t.enrollables = [e for e in ghost.enrollables]
            t.verifiables = [v for v in ghost.verifiables]
            t.enroll_version = 1
            self.tracklets[t.id] = t
            self.gallery.add(t)
        self._ghost_ids = set(self.tracklets)

    def _majority_gt(self, t: Tracklet) -> int | None:
        gts = [self._gt_of_det[d] for d in t.detections if self._gt_of_det.get(d) is not None]
        if not gts:
            return None
        counts = Counter(gts)
        top = max(counts.values())
        # deterministic tie-break: smallest ground-truth label
        return min(g for g, c in counts.items() if c == top)

    def process_frame(self, frame: int, detections: list[Detection]) -> None:
        cfg = self.cfg
        live = sorted(
            (t for t in self.tracklets.values() if t.alive), key=lambda t: t.id
        )
        if cfg.motion_enabled:
            boxes = [t.predictor.predict() for t in live]
        else:
            boxes = [t.last_box for t in live]
        assignment = associate(boxes, [d.box for d in detections], cfg.iou_threshold)

        assigned: list[tuple[Tracklet, Detection]] = []
        matched_ids: set[int] = set()
        for ti, di in assignment.pairs:
            t, det = live[ti], detections[di]
            tracklet_step(t, det, frame, cfg.max_coast_frames)
            self.record.record(det.det_id, frame, t.id)
            assigned.append((t, det))
            matched_ids.add(t.id)
        for ti in assignment.unmatched_tracklets:
            tracklet_step(live[ti], None, frame, cfg.max_coast_frames)
        for di in assignment.unmatched_detections:
            det = detections[di]
            t = tracklet_new(next(self._ids), det, make_predictor(cfg.predictor, det.box))
            self.tracklets[t.id] = t
            self.record.record(det.det_id, frame, t.id)
            assigned.append((t, det))
            matched_ids.add(t.id)

        assigned.sort(key=lambda pair: pair[0].id)
        verified_now: list[tuple[Tracklet, Detection]] = []
        for t, det in assigned:
            self._gt_of_det[det.det_id] = det.gt_id
            if det.gt_id is None:
                self._have_gt = False
            qc = classify(det.quality, cfg)
            if qc is QualityClass.ENROLLABLE:
                t.add_enrollable(det.embedding.values)
                if t.id not in self.gallery:
                    self.gallery.add(t)
                verified_now.append((t, det))
            elif qc is QualityClass.VERIFIABLE:
                t.add_verifiable(det.embedding.values)
                verified_now.append((t, det))

        if cfg.reconnect_mode is not ReconnectMode.OFF:
            for t, det in verified_now:
                if t.status is TrackStatus.DEAD:
                    continue  # absorbed by an earlier fusion this frame
                absorbed_dets = list(t.detections)
                decision = try_reconnect(t, self.gallery, cfg, exclude=matched_ids, frame=frame)
                self.decisions.append(decision)
                if decision.outcome is ReconnectOutcome.FUSED:
                    target = self.tracklets[decision.target_id]
                    pair = JoinPair(t.id, target.id, frame)
                    absorbed_set = set(absorbed_dets)
                    pre_dets = [d for d in target.detections if d not in absorbed_set]
                    self.joins.append(pair)
                    self.fusion_audits.append(
                        FusionAudit(
                            pair,
                            self._majority_of(absorbed_dets),
                            self._majority_of(pre_dets),
                        )
                    )
                    self.record.reassign(det.det_id, target.id)
                    self.record.apply_join(pair)
                    matched_ids.add(target.id)
        self.frames_processed += 1

    def _majority_of(self, det_ids: list[int]) -> int | None:
        vals = [
            g
            for g in (self._gt_of_det.get(d) for d in det_ids)
            if g is not None
        ]
        if not vals:
            return None
        counts = Counter(vals)
        top = max(counts.values())
        # deterministic tie-break: smallest ground-truth label
        return min(g for g, c in counts.items() if c == top)

    def run(self, stream: Iterable[Detection]) -> None:
        """Consume a frame-sorted stream, coasting through empty frames."""
        last_frame: int | None = None
        for frame, group in groupby(stream, key=lambda d: d.frame):
            if last_frame is not None:
                if frame < last_frame:
                    raise ValueError("detection stream is not sorted by frame")
                for empty in range(last_frame + 1, frame):
                    self.process_frame(empty, [])
            self.process_frame(frame, list(group))
            last_frame = frame

    # ------------------------------------------------------------------
    # outputs

    def track_rows(self) -> list[tuple[int, int, int, int]]:
        """(det_id, frame, emitted_id, corrected_id) per detection.

        The corrected column equals the emitted one when correction is off.
        """
        rows = self.record.rows()
        if self.cfg.correction_enabled:
            return rows
        return [(d, f, e, e) for d, f, e, _ in rows]

    def eval_records(self) -> list[EvalRecord]:
        """Assignments joined with ground truth, honoring the correction flag."""
        out = []
        for det_id, frame, emitted, corrected in self.track_rows():
            gt = self._gt_of_det.get(det_id)
            if gt is None:
                continue
            track = corrected if self.cfg.correction_enabled else emitted
            out.append(EvalRecord(det_id, frame, gt, track))
        return out

    def report(self) -> EvalReport:
        return evaluate(self.eval_records())

    def wrong_fusion_count(self) -> int:
        return sum(1 for audit in self.fusion_audits if audit.wrong)


def run_pipeline(
    cfg: Config,
    stream: Iterable[Detection],
    ghosts: Iterable[GhostTracklet] = (),
) -> TrackingEngine:
    engine = TrackingEngine(cfg, ghosts)
    engine.run(stream)
    return engine
