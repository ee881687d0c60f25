"""Long-term tracking metrics: mismatch errors, fragmentation, completion rates.

Two mismatch flavours are counted while scanning detections in frame order.
When the track id assigned to a ground-truth identity changes, the switch is
*soft* if the new id has never been assigned to any detection so far (a
recoverable fragmentation) and *hard* if the id was used before (an identity
switch that is usually unrecoverable). An identity's first assignment is not
a mismatch.

Completion of an identity is the largest fraction of its detections covered
by a single track id. ``CR_X`` is the fraction of identities with completion
at least X percent, sampled at integer X in 1..100; the completion-rate sum
is the mean of that curve.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class EvalRecord:
    """One detection with ground truth and (possibly absent) assigned track."""

    det_id: int
    frame: int
    gt_id: int
    track_id: int | None


@dataclass
class EvalReport:
    smme_count: int
    hmme_count: int
    frag: float
    idsw: float
    crs: float
    crp: list[float] = field(repr=False)
    num_dets: int = 0
    num_ids: int = 0

    def to_dict(self) -> dict:
        return {
            "num_dets": self.num_dets,
            "num_ids": self.num_ids,
            "smme_count": self.smme_count,
            "hmme_count": self.hmme_count,
            "frag": self.frag,
            "idsw": self.idsw,
            "crs": self.crs,
            "crp": list(self.crp),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(
            smme_count=d["smme_count"],
            hmme_count=d["hmme_count"],
            frag=d["frag"],
            idsw=d["idsw"],
            crs=d["crs"],
            crp=list(d["crp"]),
            num_dets=d["num_dets"],
            num_ids=d["num_ids"],
        )


def _ordered(records: list[EvalRecord]) -> list[EvalRecord]:
    return sorted(records, key=lambda r: (r.frame, r.det_id))


def count_mismatches(records: list[EvalRecord]) -> tuple[int, int]:
    """Count (soft, hard) mismatch errors over a frame-ordered scan.

    Unassigned detections neither trigger events nor advance an identity's
    current track id.
    """
    current: dict[int, int] = {}
    seen: set[int] = set()
    smme = 0
    hmme = 0
    for rec in _ordered(records):
        t = rec.track_id
        if t is None:
            continue
        prev = current.get(rec.gt_id)
        if prev is not None and prev != t:
            if t in seen:
                hmme += 1
            else:
                smme += 1
        current[rec.gt_id] = t
        seen.add(t)
    return smme, hmme


def completion_rates(records: list[EvalRecord]) -> np.ndarray:
    """CR_X for integer X in 1..100 as a length-100 vector.

    The comparison ``completion >= X/100`` is done in integer arithmetic
    (100 * covered >= X * total) so boundary cases are exact.
    """
    total: Counter = Counter()
    by_track: dict[int, Counter] = defaultdict(Counter)
    for rec in records:
        total[rec.gt_id] += 1
        if rec.track_id is not None:
            by_track[rec.gt_id][rec.track_id] += 1
    if not total:
        raise ValueError("completion rates need at least one ground-truth identity")
    crp = np.zeros(100, dtype=np.float64)
    n_ids = len(total)
    for gt_id, n in total.items():
        covered = max(by_track[gt_id].values(), default=0)
        for i in range(100):
            if 100 * covered >= (i + 1) * n:
                crp[i] += 1.0
    crp /= n_ids
    return crp


def evaluate(records: list[EvalRecord]) -> EvalReport:
    """Full evaluation of one run's assignments against ground truth."""
    if not records:
        raise ValueError("cannot evaluate an empty input")
    records = _ordered(records)
    smme, hmme = count_mismatches(records)
    crp = completion_rates(records)
    num_dets = len(records)
    return EvalReport(
        smme_count=smme,
        hmme_count=hmme,
        frag=smme / num_dets,
        idsw=hmme / num_dets,
        crs=float(np.mean(crp)),
        crp=[float(v) for v in crp],
        num_dets=num_dets,
        num_ids=len({r.gt_id for r in records}),
    )


def evaluate_many(inputs: list[list[EvalRecord]]) -> EvalReport:
    """Pool several independent runs (disjoint scenes) into one report.

    Mismatches are scanned per run and summed; completions are pooled over
    all (run, identity) pairs. Identity and track id spaces of different
    runs are treated as disjoint.
    """
    if not inputs or all(len(r) == 0 for r in inputs):
        raise ValueError("cannot evaluate an empty suite")
    smme = 0
    hmme = 0
    num_dets = 0
    num_ids = 0
    crp_sum = np.zeros(100, dtype=np.float64)
    for records in inputs:
        if not records:
            continue
        rep = evaluate(records)
        smme += rep.smme_count
        hmme += rep.hmme_count
        num_dets += rep.num_dets
        num_ids += rep.num_ids
        crp_sum += np.asarray(rep.crp) * rep.num_ids
    crp = crp_sum / num_ids
    return EvalReport(
        smme_count=smme,
        hmme_count=hmme,
        frag=smme / num_dets,
        idsw=hmme / num_dets,
        crs=float(np.mean(crp)),
        crp=[float(v) for v in crp],
        num_dets=num_dets,
        num_ids=num_ids,
    )
