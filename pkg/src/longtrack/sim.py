"""Synthetic crowded-scene generator with full ground truth.

Identities carry a latent unit embedding and walk piecewise-linear waypoint
paths inside the frame. Each frame, every present identity emits a detection
unless its box center sits inside an active occluder or the detector dropout
fires. Observed embeddings are the latent plus quality-scaled Gaussian noise,
renormalized; detection confidence falls with occluder overlap, pose angles
follow the walking direction, and sharpness acts as a distance proxy through
the box height.

The module also builds the template collections used by the reconnection
parameter study: pure per-identity template sets and their mixed-identity
variants in which 5-template slices of two identities are spliced into new
tracklets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .core import BBox, Detection, Embedding, QualityAttrs
from .metrics import EvalRecord


class SceneScriptError(ValueError):
    """Raised when a scene script violates its invariants."""


@dataclass(frozen=True)
class Occluder:
    rect: tuple[float, float, float, float]  # x, y, w, h
    start: int = 0
    stop: int = 10**9  # active on frames start <= f < stop

    def active(self, frame: int) -> bool:
        return self.start <= frame < self.stop

    def contains(self, px: float, py: float) -> bool:
        x, y, w, h = self.rect
        return x <= px <= x + w and y <= py <= y + h

    def overlap_fraction(self, box: BBox) -> float:
        x, y, w, h = self.rect
        left = max(box.x, x)
        top = max(box.y, y)
        right = min(box.x + box.w, x + w)
        bottom = min(box.y + box.h, y + h)
        iw = right - left
        ih = bottom - top
        if iw <= 0 or ih <= 0:
            return 0.0
        return (iw * ih) / box.area


@dataclass(frozen=True)
class IdentitySpec:
    """One scripted person: when they are on scene, where they walk, how they look."""

    ident: int
    presence: tuple[tuple[int, int], ...]  # disjoint ascending [start, stop) windows
    waypoints: tuple[tuple[float, float], ...]
    box_size: tuple[float, float] = (36.0, 44.0)
    quality: float = 0.99  # scales confidence and sharpness
    pose_amplitude: float = 10.0  # degrees of heading-driven pose swing

    def __post_init__(self):
        if not self.presence:
            raise SceneScriptError(f"identity {self.ident} has no presence window")
        prev_stop = -1
        for start, stop in self.presence:
            if start >= stop:
                raise SceneScriptError(
                    f"identity {self.ident}: window [{start}, {stop}) is empty"
                )
            if start <= prev_stop:
                raise SceneScriptError(
                    f"identity {self.ident}: presence windows overlap or are unsorted"
                )
            prev_stop = stop
        if not self.waypoints:
            raise SceneScriptError(f"identity {self.ident} has no waypoints")
        if not 0.0 <= self.quality <= 1.0:
            raise SceneScriptError(f"identity {self.ident}: quality must be in [0, 1]")

    @property
    def first_frame(self) -> int:
        return self.presence[0][0]

    @property
    def last_frame(self) -> int:
        return self.presence[-1][1]

    def present(self, frame: int) -> bool:
        return any(start <= frame < stop for start, stop in self.presence)

    def position(self, frame: int) -> tuple[float, float, float, float]:
        """(x, y, dx, dy): path point and unit walking direction at a frame."""
        span = self.last_frame - 1 - self.first_frame
        u = 0.0 if span <= 0 else (frame - self.first_frame) / span
        u = min(max(u, 0.0), 1.0)
        pts = self.waypoints
        if len(pts) == 1:
            return pts[0][0], pts[0][1], 0.0, 0.0
        segs = len(pts) - 1
        pos = u * segs
        k = min(int(pos), segs - 1)
        frac = pos - k
        ax, ay = pts[k]
        bx, by = pts[k + 1]
        dx, dy = bx - ax, by - ay
        norm = math.hypot(dx, dy)
        if norm > 0:
            dx, dy = dx / norm, dy / norm
        return ax + frac * (bx - ax), ay + frac * (by - ay), dx, dy


@dataclass(frozen=True)
class SceneScript:
    """Full ground-truth description of one synthetic scene."""

    seed: int
    frame_count: int
    identities: tuple[IdentitySpec, ...]
    occluders: tuple[Occluder, ...] = ()
    frame_rect: tuple[float, float] = (640.0, 480.0)
    fps: float = 10.0
    embed_noise: float = 0.05
    box_jitter: float = 0.0
    miss_rate: float = 0.0
    embedding_dim: int = 64
    # None draws latents uniformly on the sphere; a positive spread packs
    # them into a cone around a common direction (crowded identity space)
    latent_spread: float | None = None
    # (ident_a, ident_b, similarity): force latent similarity of a pair
    confusable_pairs: tuple[tuple[int, int, float], ...] = ()

    def __post_init__(self):
        if self.frame_count <= 0:
            raise SceneScriptError("frame_count must be positive")
        if self.embed_noise < 0 or self.box_jitter < 0:
            raise SceneScriptError("noise scales must be non-negative")
        if not 0.0 <= self.miss_rate < 1.0:
            raise SceneScriptError("miss_rate must be in [0, 1)")
        if self.embedding_dim < 2:
            raise SceneScriptError("embedding_dim must be at least 2")
        idents = [spec.ident for spec in self.identities]
        if len(set(idents)) != len(idents):
            raise SceneScriptError("identity labels must be unique")


def _unit_sphere(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def _with_similarity(
    anchor: np.ndarray, other: np.ndarray, sim: float
) -> np.ndarray:
    """Rotate ``other`` so that (1 + cos(anchor, other)) / 2 equals ``sim``."""
    cos_t = 2.0 * sim - 1.0
    perp = other - np.dot(other, anchor) * anchor
    norm = np.linalg.norm(perp)
    if norm < 1e-12:
        raise SceneScriptError("confusable pair latents are collinear")
    perp /= norm
    return cos_t * anchor + math.sqrt(max(0.0, 1.0 - cos_t * cos_t)) * perp


def scene_latents(script: SceneScript) -> dict[int, np.ndarray]:
    """Latent unit embedding per identity, deterministic in the seed."""
    rng = np.random.default_rng([script.seed, 0xA11CE])
    latents: dict[int, np.ndarray] = {}
    if script.latent_spread is None:
        for spec in script.identities:
            latents[spec.ident] = _unit_sphere(rng, script.embedding_dim)
    else:
        common = _unit_sphere(rng, script.embedding_dim)
        for spec in script.identities:
            v = common + script.latent_spread * _unit_sphere(rng, script.embedding_dim)
            latents[spec.ident] = v / np.linalg.norm(v)
    for a, b, sim in script.confusable_pairs:
        latents[b] = _with_similarity(latents[a], latents[b], sim)
    return latents


def generate(script: SceneScript) -> tuple[list[Detection], list[EvalRecord]]:
    """Produce the detection stream and the ground-truth skeleton of a scene.

    The skeleton mirrors the stream one-to-one with ``track_id`` unset.
    Output is deterministic given the script (including its seed).
    """
    latents = scene_latents(script)
    rng = np.random.default_rng([script.seed, 0x5CE11E])
    dim = script.embedding_dim
    detections: list[Detection] = []
    records: list[EvalRecord] = []
    det_counter = 0
    for frame in range(script.frame_count):
        occluders = [o for o in script.occluders if o.active(frame)]
        for spec in script.identities:
            if not spec.present(frame):
                continue
            # fixed draw order so streams with different quality knobs stay
            # aligned draw-for-draw
            jx, jy = rng.standard_normal(2) * script.box_jitter
            conf_n, sharp_n, yaw_n, pose_n = rng.standard_normal(4)
            gauss = rng.standard_normal(dim)
            missed = rng.random() < script.miss_rate

            px, py, dx, dy = spec.position(frame)
            w, h = spec.box_size
            box = BBox(px - w / 2.0 + jx, py - h / 2.0 + jy, w, h)
            cx, cy = box.center
            if any(o.contains(cx, cy) for o in occluders):
                continue
            if missed:
                continue
            occ = max((o.overlap_fraction(box) for o in occluders), default=0.0)

            conf = float(np.clip(spec.quality * (1.0 - 0.75 * occ) + 0.01 * conf_n, 0.0, 1.0))
            sharp = float(
                np.clip(
                    spec.quality * min(1.0, h / 40.0) * (1.0 - 0.5 * occ) + 0.01 * sharp_n,
                    0.0,
                    1.0,
                )
            )
            deviation = math.degrees(math.atan2(dx, dy)) if (dx or dy) else 0.0
            yaw = spec.pose_amplitude * deviation / 90.0 + 1.5 * yaw_n
            yaw = float(np.clip(yaw, -89.0, 89.0))
            pitch = float(np.clip(0.35 * yaw + 1.0 * pose_n, -89.0, 89.0))
            roll = float(np.clip(0.2 * yaw + 0.5 * pose_n, -89.0, 89.0))

            noise_scale = script.embed_noise * (1.0 + (1.0 - conf))
            emb = Embedding(latents[spec.ident] + noise_scale * gauss)

            det = Detection(
                frame=frame,
                det_id=det_counter,
                box=box,
                embedding=emb,
                quality=QualityAttrs(conf, yaw, pitch, roll, sharp),
                gt_id=spec.ident,
            )
            detections.append(det)
            records.append(EvalRecord(det_counter, frame, spec.ident, None))
            det_counter += 1
    return detections, records


@dataclass(frozen=True)
class GhostTracklet:
    """Gallery-only distractor identity preloaded before a run."""

    ghost_id: int
    enrollables: tuple[np.ndarray, ...]
    verifiables: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.enrollables) < 1:
            raise ValueError("a ghost tracklet needs at least one enrollable template")


def make_ghosts(
    n: int,
    per_ghost_enrollables: int = 5,
    seed: int = 0,
    dim: int = 64,
    noise: float = 0.02,
) -> list[GhostTracklet]:
    """Distractor identities with sphere-uniform latents and clean templates.

    Ghost ids are negative, keeping them disjoint from scene identity labels.
    """
    if n < 0:
        raise ValueError("ghost count must be non-negative")
    if per_ghost_enrollables < 1:
        raise ValueError("per_ghost_enrollables must be >= 1")
    rng = np.random.default_rng([seed, 0x6057])
    ghosts = []
    for i in range(n):
        latent = _unit_sphere(rng, dim)
        enroll = []
        verif = []
        for _ in range(per_ghost_enrollables):
            e = latent + noise * rng.standard_normal(dim)
            enroll.append(e / np.linalg.norm(e))
            v = latent + noise * rng.standard_normal(dim)
            verif.append(v / np.linalg.norm(v))
        ghosts.append(
            GhostTracklet(ghost_id=-(i + 1), enrollables=tuple(enroll), verifiables=tuple(verif))
        )
    return ghosts


@dataclass
class TemplateTracklet:
    """A tracklet reduced to its template store, for the parameter study.

    ``identities`` lists the source identities of its templates; the first
    entry is the identity that owns the track.
    """

    track_id: int
    identities: tuple[int, ...]
    templates: list[np.ndarray]

    @property
    def owner(self) -> int:
        return self.identities[0]

    @property
    def pure(self) -> bool:
        return len(self.identities) == 1


@dataclass
class TemplateDB:
    dim: int
    tracklets: list[TemplateTracklet]

    def total_templates(self) -> int:
        return sum(len(t.templates) for t in self.tracklets)

    def identity_count(self) -> int:
        return len({i for t in self.tracklets for i in t.identities})


def pure_identity_db(
    num_identities: int,
    templates_per_identity: int = 40,
    dim: int = 64,
    seed: int = 0,
    noise: float = 0.05,
    latent_spread: float | None = None,
    confusable_fraction: float = 0.0,
    confusable_similarity: float = 0.85,
) -> TemplateDB:
    """Perfect-tracking template database: one pure tracklet per identity."""
    rng = np.random.default_rng([seed, 0xDB])
    latents = []
    if latent_spread is None:
        latents = [_unit_sphere(rng, dim) for _ in range(num_identities)]
    else:
        common = _unit_sphere(rng, dim)
        for _ in range(num_identities):
            v = common + latent_spread * _unit_sphere(rng, dim)
            latents.append(v / np.linalg.norm(v))
    n_pairs = int(confusable_fraction * num_identities / 2.0)
    order = rng.permutation(num_identities)
    for k in range(n_pairs):
        a, b = int(order[2 * k]), int(order[2 * k + 1])
        latents[b] = _with_similarity(latents[a], latents[b], confusable_similarity)
    tracklets = []
    for ident in range(num_identities):
        templates = []
        for _ in range(templates_per_identity):
            v = latents[ident] + noise * rng.standard_normal(dim)
            templates.append(v / np.linalg.norm(v))
        tracklets.append(TemplateTracklet(ident, (ident,), templates))
    return TemplateDB(dim=dim, tracklets=tracklets)


def mixed_identity_db(
    db: TemplateDB,
    fraction: float,
    seed: int = 0,
    slice_len: int = 5,
) -> TemplateDB:
    """Corrupt a pure database so that a fraction of identities are mixed.

    Repeatedly picks a pair of still-pure tracklets and moves a slice of
    ``slice_len`` consecutive templates from each into a new tracklet that
    then holds both identities' templates. Donors must retain at least
    ``slice_len`` templates. The mixed identity count is rounded up to the
    nearest even number when needed.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must be in [0, 1]")
    tracklets = [replace(t, templates=list(t.templates)) for t in db.tracklets]
    out = TemplateDB(dim=db.dim, tracklets=tracklets)
    num_ids = out.identity_count()
    target = round(fraction * num_ids)
    ops = (target + 1) // 2
    if ops == 0:
        return out
    rng = np.random.default_rng([seed, 0x313D])
    eligible = [
        t for t in tracklets if t.pure and len(t.templates) >= 2 * slice_len
    ]
    if len(eligible) < 2 * ops:
        raise ValueError(
            f"need {2 * ops} pure tracklets with >= {2 * slice_len} templates, "
            f"found {len(eligible)}"
        )
    picked = rng.permutation(len(eligible))
    next_id = max(t.track_id for t in tracklets) + 1
    for k in range(ops):
        a = eligible[int(picked[2 * k])]
        b = eligible[int(picked[2 * k + 1])]
        slices = []
        for donor in (a, b):
            start = int(rng.integers(0, len(donor.templates) - slice_len + 1))
            slices.append(donor.templates[start : start + slice_len])
            del donor.templates[start : start + slice_len]
        tracklets.append(
            TemplateTracklet(next_id, (a.owner, b.owner), slices[0] + slices[1])
        )
        next_id += 1
    return out
