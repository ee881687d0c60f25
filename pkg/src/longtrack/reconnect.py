"""Tracklet reconnection: rank-gated embedding retrieval and fusion.

Each tracklet that just produced a verifiable template queries a gallery of
tracklets holding enrollable templates. The top candidate is accepted only
if (a) its similarity clears a threshold and, in ranked mode, (b) it stands
clear of the next-ranked candidates: the top similarity must be at least
the mean of the next ``margin_ranks`` similarities divided by
``margin_ratio``. Accepted candidates absorb the querying tracklet's
detections and templates and continue under their own id.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .core import Config, ReconnectMode, Tracklet, TrackStatus


class DegenerateTemplateError(ValueError):
    """Raised when a template set averages to the zero vector."""


def similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity mapped to [0, 1]: (1 + cos) / 2 for unit vectors."""
    s = 0.5 * (1.0 + float(np.dot(a, b)))
    if s < 0.0:
        return 0.0
    if s > 1.0:
        return 1.0
    return s


def reference_template(embeddings: Sequence[np.ndarray]) -> np.ndarray:
    """Component-wise mean of unit vectors, renormalized to unit length."""
    if len(embeddings) == 0:
        raise ValueError("cannot build a reference template from zero embeddings")
    mean = np.mean(np.asarray(embeddings, dtype=np.float64), axis=0)
    norm = float(np.linalg.norm(mean))
    if norm < 1e-12:
        raise DegenerateTemplateError("template mean has zero norm")
    return mean / norm


def check_rank_margin(
    sims: Sequence[float],
    margin_ratio: float,
    margin_ranks: int,
) -> bool:
    """Test whether the top similarity clears the rank margin.

    ``sims`` must be sorted descending. The top value must be at least
    ``1/margin_ratio`` times the mean of the next ``margin_ranks`` values;
    when fewer competitors exist the mean runs over those available, and
    with no competitor at all the check passes vacuously.
    """
    if len(sims) == 0:
        raise ValueError("sims must be nonempty")
    n_rest = min(margin_ranks, len(sims) - 1)
    if n_rest == 0:
        return True
    rest_mean = float(np.mean(np.asarray(sims[1 : 1 + n_rest], dtype=np.float64)))
    return sims[0] >= (1.0 / margin_ratio) * rest_mean


class Gallery:
    """Similarity-searchable set of tracklets with enrollable templates.

    Reference templates (normalized means of each tracklet's enrollables)
    are cached and refreshed lazily via each tracklet's ``enroll_version``.
    """

    def __init__(self, dim: int):
        self.dim = dim
        self._tracklets: dict[int, Tracklet] = {}
        self._refs: dict[int, np.ndarray] = {}
        self._versions: dict[int, int] = {}

    def __len__(self) -> int:
        return len(self._tracklets)

    def __contains__(self, track_id: int) -> bool:
        return track_id in self._tracklets

    def get(self, track_id: int) -> Tracklet:
        return self._tracklets[track_id]

    def add(self, tracklet: Tracklet) -> None:
        if not tracklet.enrollables:
            raise ValueError(f"tracklet {tracklet.id} has no enrollable templates")
        self._tracklets[tracklet.id] = tracklet

    def discard(self, track_id: int) -> None:
        self._tracklets.pop(track_id, None)
        self._refs.pop(track_id, None)
        self._versions.pop(track_id, None)

    def reference(self, track_id: int) -> np.ndarray:
        t = self._tracklets[track_id]
        if self._versions.get(track_id) != t.enroll_version:
            self._refs[track_id] = reference_template(t.enrollables)
            self._versions[track_id] = t.enroll_version
        return self._refs[track_id]

    def rank(self, query: np.ndarray, exclude: set[int]) -> list[tuple[int, float]]:
        """All candidates sorted by similarity descending, ties to older ids."""
        ids = [i for i in self._tracklets if i not in exclude]
        if not ids:
            return []
        refs = np.stack([self.reference(i) for i in ids])
        sims = 0.5 * (1.0 + refs @ query)
        np.clip(sims, 0.0, 1.0, out=sims)
        order = sorted(range(len(ids)), key=lambda k: (-sims[k], ids[k]))
        return [(ids[k], float(sims[k])) for k in order]


class ReconnectOutcome(Enum):
    FUSED = "fused"
    REJECTED_THRESHOLD = "rejected_threshold"
    REJECTED_RANK_MARGIN = "rejected_rank_margin"
    NO_CANDIDATES = "no_candidates"


@dataclass(frozen=True)
class ReconnectionDecision:
    query_id: int
    ranked: list[tuple[int, float]]
    outcome: ReconnectOutcome
    target_id: int | None = None
    threshold: float = 0.0


@dataclass(frozen=True)
class JoinPair:
    """A fusion event: ``absorbed`` was merged into ``surviving``."""

    absorbed: int
    surviving: int
    frame: int

    def __post_init__(self):
        if self.absorbed == self.surviving:
            raise ValueError("a tracklet cannot absorb itself")


def fuse(absorbed: Tracklet, surviving: Tracklet, gallery: Gallery, frame: int) -> JoinPair:
    """Merge ``absorbed`` into ``surviving`` and keep tracking under the latter.

    Detections and template stores move (not copy), the surviving tracklet
    takes over the absorbed tracklet's motion state, and the absorbed
    tracklet is retired and dropped from the gallery.
    """
    surviving.detections = sorted(surviving.detections + absorbed.detections)
    absorbed.detections = []
    if absorbed.enrollables:
        surviving.enrollables.extend(absorbed.enrollables)
        surviving.enroll_version += 1
        absorbed.enrollables = []
    surviving.verifiables.extend(absorbed.verifiables)
    absorbed.verifiables = []
    surviving.predictor = absorbed.predictor
    surviving.last_box = absorbed.last_box
    surviving.status = TrackStatus.ACTIVE
    surviving.coast_count = 0
    surviving.last_update_frame = frame
    absorbed.status = TrackStatus.DEAD
    gallery.discard(absorbed.id)
    return JoinPair(absorbed=absorbed.id, surviving=surviving.id, frame=frame)


def try_reconnect(
    t_k: Tracklet,
    gallery: Gallery,
    cfg: Config,
    exclude: set[int],
    frame: int,
) -> ReconnectionDecision:
    """Attempt to fuse ``t_k`` with its most similar gallery candidate.

    The query is the normalized mean of all of ``t_k``'s verifiable
    templates. ``exclude`` holds candidate ids that must not be retrieved,
    typically tracklets that already received a detection this frame. On a
    fused outcome the merge has already been applied.
    """
    if cfg.reconnect_mode is ReconnectMode.OFF:
        raise ValueError("reconnection attempted with reconnection disabled")
    if not t_k.verifiables:
        raise ValueError(f"tracklet {t_k.id} has no verifiable templates to query with")
    query = reference_template(t_k.verifiables)
    ranked = gallery.rank(query, exclude=exclude | {t_k.id})
    if cfg.reconnect_mode is ReconnectMode.SIMPLE:
        threshold = cfg.simple_reconnect_threshold
    else:
        threshold = cfg.reconnect_threshold
    if not ranked:
        return ReconnectionDecision(t_k.id, ranked, ReconnectOutcome.NO_CANDIDATES,
                                    threshold=threshold)
    top_id, top_sim = ranked[0]
    if top_sim < threshold:
        return ReconnectionDecision(t_k.id, ranked, ReconnectOutcome.REJECTED_THRESHOLD,
                                    threshold=threshold)
    if cfg.reconnect_mode is ReconnectMode.RANKED:
        sims = [s for _, s in ranked]
        if not check_rank_margin(sims, cfg.margin_ratio, cfg.margin_ranks):
            return ReconnectionDecision(
                t_k.id, ranked, ReconnectOutcome.REJECTED_RANK_MARGIN,
                threshold=threshold)
    fuse(t_k, gallery.get(top_id), gallery, frame)
    return ReconnectionDecision(t_k.id, ranked, ReconnectOutcome.FUSED,
                                target_id=top_id, threshold=threshold)
