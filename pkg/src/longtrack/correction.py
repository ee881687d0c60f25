"""Retroactive track correction: rewriting past assignments of absorbed tracks.

``TrackRecord`` keeps the emission-time assignment of every detection plus a
union-find over track ids fed by fusion events. Resolving a detection's
corrected id follows the join chain, so a join costs O(1) amortized while the
observable behaviour matches an eager rewrite of the absorbed track's
detections. ``EagerTrackRecord`` is that literal rewrite, kept as a
cross-check oracle.
"""

from __future__ import annotations

import logging

from .reconnect import JoinPair

logger = logging.getLogger(__name__)


class TrackRecord:
    """Append-only detection-to-track history with retroactive joins."""

    def __init__(self):
        self._rows: list[list[int]] = []  # [det_id, frame, emitted_track_id]
        self._row_of: dict[int, int] = {}
        self._parent: dict[int, int] = {}
        self._known: set[int] = set()
        self.joins: list[JoinPair] = []

    def record(self, det_id: int, frame: int, track_id: int) -> None:
        if det_id in self._row_of:
            raise ValueError(f"detection {det_id} recorded twice")
        self._row_of[det_id] = len(self._rows)
        self._rows.append([det_id, frame, track_id])
        self._known.add(track_id)

    def reassign(self, det_id: int, track_id: int) -> None:
        """Change the emission-time id of a detection (same-frame re-emit)."""
        self._rows[self._row_of[det_id]][2] = track_id
        self._known.add(track_id)

    def resolve(self, track_id: int) -> int:
        """Follow the join chain from a track id to its current id."""
        root = track_id
        while root in self._parent:
            root = self._parent[root]
        # path compression
        while track_id != root:
            nxt = self._parent[track_id]
            self._parent[track_id] = root
            track_id = nxt
        return root

    def apply_join(self, pair: JoinPair) -> None:
        """Relabel everything carrying the absorbed id to the surviving id.

        Joins naming a track id never seen by this record are ignored with
        a warning.
        """
        if pair.absorbed not in self._known:
            logger.warning(
                "ignoring join of unknown track %d into %d", pair.absorbed, pair.surviving
            )
            return
        self._known.add(pair.surviving)
        self._parent[pair.absorbed] = self.resolve(pair.surviving)
        self.joins.append(pair)

    def emitted(self, det_id: int) -> int:
        return self._rows[self._row_of[det_id]][2]

    def corrected(self, det_id: int) -> int:
        return self.resolve(self.emitted(det_id))

    def rows(self) -> list[tuple[int, int, int, int]]:
        """(det_id, frame, emitted_id, corrected_id) in emission order."""
        return [(d, f, t, self.resolve(t)) for d, f, t in self._rows]

    def __len__(self) -> int:
        return len(self._rows)


class EagerTrackRecord:
    """Oracle twin of TrackRecord: joins rewrite detections immediately.

    Costs O(n) per join in the absorbed track's detection count; used to
    cross-check the union-find implementation.
    """

    def __init__(self):
        self._rows: list[list[int]] = []
        self._row_of: dict[int, int] = {}
        self._current: dict[int, int] = {}  # det_id -> corrected id
        self._known: set[int] = set()
        self.joins: list[JoinPair] = []

    def record(self, det_id: int, frame: int, track_id: int) -> None:
        if det_id in self._row_of:
            raise ValueError(f"detection {det_id} recorded twice")
        self._row_of[det_id] = len(self._rows)
        self._rows.append([det_id, frame, track_id])
        self._current[det_id] = track_id
        self._known.add(track_id)

    def reassign(self, det_id: int, track_id: int) -> None:
        self._rows[self._row_of[det_id]][2] = track_id
        self._current[det_id] = track_id
        self._known.add(track_id)

    def apply_join(self, pair: JoinPair) -> None:
        if pair.absorbed not in self._known:
            logger.warning(
                "ignoring join of unknown track %d into %d", pair.absorbed, pair.surviving
            )
            return
        self._known.add(pair.surviving)
        for det_id, current in self._current.items():
            if current == pair.absorbed:
                self._current[det_id] = pair.surviving
        self.joins.append(pair)

    def emitted(self, det_id: int) -> int:
        return self._rows[self._row_of[det_id]][2]

    def corrected(self, det_id: int) -> int:
        return self._current[det_id]

    def rows(self) -> list[tuple[int, int, int, int]]:
        return [(d, f, t, self._current[d]) for d, f, t in self._rows]

    def __len__(self) -> int:
        return len(self._rows)
