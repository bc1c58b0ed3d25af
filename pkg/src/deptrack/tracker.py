"""SORT-style and ByteTrack-style trackers with depth-fused association.

ByteTrack-style: detections split at ``tau_high``. Stage 1 matches every live
track to the high-score detections on 1 - IoU. Stage 2 matches the tracks left
over to the low-score detections on ``lambda * (1 - IoU) + gamma * D`` where D
is the clamped depth distance; with depth disabled stage 2 uses 1 - IoU. Only
unmatched high-score detections start tracks.

SORT-style: one stage over the high-score detections; when depth is enabled
the fused cost is used there. With gamma = 0 or depth disabled, detection
depths are dropped on entry, so tracks report no depth.

Lifecycle: new tracks are tentative and become confirmed after ``min_hits``
consecutive matches; a tentative track that misses a frame is dropped, a
confirmed one survives up to ``max_age`` unmatched frames.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .assignment import depth_distance, fuse_cost, gate, hungarian, iou_cost
from .geometry import BBox, Detection, boxes_to_array
from .kalman import KalmanParams, kf_init, predict_many, update_many, xyah_to_box, xyah_to_tlwh


class TrackState(Enum):
    TENTATIVE = "tentative"
    CONFIRMED = "confirmed"
    REMOVED = "removed"


@dataclass
class TrackerConfig:
    tau_high: float = 0.6
    tau_low: float = 0.1
    max_age: int = 30
    min_hits: int = 3
    iou_gate: float = 0.9
    low_gate: float = 0.5
    lam: float = 0.8
    gamma: float = 0.2
    eta: float = 1.0
    depth_ema: float = 1.0
    depth_enabled: bool = True
    kalman: KalmanParams = field(default_factory=KalmanParams)

    def __post_init__(self):
        if not 0.0 <= self.tau_low <= self.tau_high <= 1.0:
            raise ValueError(f"need 0 <= tau_low <= tau_high <= 1, got {self.tau_low}, {self.tau_high}")
        if self.max_age < 1 or self.min_hits < 1:
            raise ValueError("max_age and min_hits must be >= 1")
        if not 0.0 <= self.depth_ema <= 1.0:
            raise ValueError(f"depth_ema must lie in [0, 1], got {self.depth_ema}")
        if self.lam < 0 or self.gamma < 0:
            raise ValueError("lambda and gamma must be non-negative")
        if self.eta <= 0:
            raise ValueError("eta must be positive")

    @property
    def uses_depth(self) -> bool:
        return self.depth_enabled and self.gamma > 0


@dataclass
class Track:
    id: int
    mean: np.ndarray
    covariance: np.ndarray
    depth: float  # NaN while unknown
    score: float
    hits: int = 1
    age: int = 0
    state: TrackState = TrackState.TENTATIVE

    @property
    def box(self) -> BBox:
        return xyah_to_box(self.mean)


class Emitted(NamedTuple):
    id: int
    box: BBox
    depth: Optional[float]
    score: float


@dataclass
class TrackerState:
    tracks: list[Track] = field(default_factory=list)
    frame: int = 0
    next_id: int = 1


def update_track_depth(track_depth: float, det_depth: Optional[float], ema: float) -> float:
    if det_depth is None:
        return track_depth
    if track_depth is None or math.isnan(track_depth):
        return det_depth
    return (1.0 - ema) * track_depth + ema * det_depth


def _det_depths(dets: Sequence[Detection]) -> np.ndarray:
    return np.array([np.nan if d.depth is None else d.depth for d in dets], dtype=float)


def association_cost(tracks: Sequence[Track], dets: Sequence[Detection], cfg: TrackerConfig,
                     use_depth: bool) -> np.ndarray:
    c = iou_cost(xyah_to_tlwh(np.array([t.mean for t in tracks])), boxes_to_array([d.box for d in dets]))
    if use_depth:
        dist = depth_distance([t.depth for t in tracks], _det_depths(dets), cfg.eta)
        c = fuse_cost(c, dist, cfg.lam, cfg.gamma)
    return c


def _associate(tracks, dets, cfg, use_depth, threshold):
    if not tracks or not dets:
        return [], list(range(len(tracks))), list(range(len(dets)))
    c = association_cost(tracks, dets, cfg, use_depth)
    a = gate(hungarian(c), c, threshold)
    return a.pairs, a.unmatched_rows, a.unmatched_cols


def _predict(tracks: list[Track], cfg: TrackerConfig) -> None:
    if not tracks:
        return
    means = np.array([t.mean for t in tracks])
    covs = np.array([t.covariance for t in tracks])
    # lost tracks keep their height fixed
    lost = np.array([t.age > 0 for t in tracks])
    means[lost, 7] = 0.0
    means, covs = predict_many(means, covs, cfg.kalman)
    for t, m, c in zip(tracks, means, covs):
        t.mean, t.covariance = m, c


def _apply_matches(matches: list[tuple[Track, Detection]], cfg: TrackerConfig) -> None:
    if not matches:
        return
    means = np.array([t.mean for t, _ in matches])
    covs = np.array([t.covariance for t, _ in matches])
    z = np.array([[d.box.x + d.box.w / 2, d.box.y + d.box.h / 2, d.box.w / d.box.h, d.box.h] for _, d in matches])
    means, covs = update_many(means, covs, z, cfg.kalman)
    for (t, d), m, c in zip(matches, means, covs):
        t.mean, t.covariance = m, c
        t.depth = update_track_depth(t.depth, d.depth, cfg.depth_ema)
        t.score = d.score
        t.hits += 1
        t.age = 0
        if t.state is TrackState.TENTATIVE and t.hits >= cfg.min_hits:
            t.state = TrackState.CONFIRMED


def _spawn(state: TrackerState, d: Detection, cfg: TrackerConfig) -> Track:
    kf = kf_init(d, cfg.kalman)
    t = Track(state.next_id, kf.mean, kf.covariance,
              np.nan if d.depth is None else d.depth, d.score)
    if cfg.min_hits <= 1:
        t.state = TrackState.CONFIRMED
    state.next_id += 1
    return t


def _finish(state: TrackerState, matched: set[int], new: list[Track], cfg: TrackerConfig) -> list[Emitted]:
    kept = []
    for t in state.tracks:
        if id(t) not in matched:
            t.hits = 0
            t.age += 1
            if t.state is TrackState.TENTATIVE or t.age > cfg.max_age:
                t.state = TrackState.REMOVED
                continue
        kept.append(t)
    kept.extend(new)
    state.tracks = kept
    out = []
    for t in kept:
        if t.age == 0 and (t.state is TrackState.CONFIRMED or state.frame <= cfg.min_hits):
            out.append(Emitted(t.id, t.box, None if math.isnan(t.depth) else float(t.depth), t.score))
    out.sort(key=lambda e: e.id)
    return out


def _strip_depth(dets: Sequence[Detection], cfg: TrackerConfig) -> Sequence[Detection]:
    # a tracker that never uses depth must not carry it either
    if cfg.uses_depth:
        return dets
    return [d if d.depth is None else replace(d, depth=None) for d in dets]


def byte_step(state: TrackerState, dets: Sequence[Detection], cfg: TrackerConfig):
    """Advance one frame with two-stage matching; returns (tracks, emitted)."""
    state.frame += 1
    dets = _strip_depth(dets, cfg)
    tracks = state.tracks
    _predict(tracks, cfg)
    high = [d for d in dets if d.score >= cfg.tau_high]
    low = [d for d in dets if cfg.tau_low <= d.score < cfg.tau_high]

    pairs1, left_tracks, left_high = _associate(tracks, high, cfg, False, cfg.iou_gate)
    rest = [tracks[i] for i in left_tracks]
    pairs2, _, _ = _associate(rest, low, cfg, cfg.uses_depth, cfg.low_gate)

    matches = [(tracks[r], high[c]) for r, c in pairs1] + [(rest[r], low[c]) for r, c in pairs2]
    _apply_matches(matches, cfg)
    new = [_spawn(state, high[c], cfg) for c in left_high]
    emitted = _finish(state, {id(t) for t, _ in matches}, new, cfg)
    return state.tracks, emitted


def sort_step(state: TrackerState, dets: Sequence[Detection], cfg: TrackerConfig):
    """Advance one frame with a single matching stage; returns (tracks, emitted)."""
    state.frame += 1
    dets = _strip_depth(dets, cfg)
    tracks = state.tracks
    _predict(tracks, cfg)
    high = [d for d in dets if d.score >= cfg.tau_high]
    pairs, _, left = _associate(tracks, high, cfg, cfg.uses_depth, cfg.iou_gate)
    matches = [(tracks[r], high[c]) for r, c in pairs]
    _apply_matches(matches, cfg)
    new = [_spawn(state, high[c], cfg) for c in left]
    emitted = _finish(state, {id(t) for t, _ in matches}, new, cfg)
    return state.tracks, emitted


class Tracker:
    """Stateful per-sequence wrapper around :func:`sort_step` / :func:`byte_step`."""

    def __init__(self, cfg: TrackerConfig | None = None, kind: str = "byte"):
        if kind not in ("sort", "byte"):
            raise ValueError(f"tracker kind must be 'sort' or 'byte', got {kind!r}")
        self.cfg = cfg or TrackerConfig()
        self.kind = kind
        self.state = TrackerState()
        self._step = byte_step if kind == "byte" else sort_step

    def step(self, dets: Sequence[Detection]) -> list[Emitted]:
        return self._step(self.state, dets, self.cfg)[1]

    def run(self, frames: dict[int, Sequence[Detection]], n_frames: Optional[int] = None) -> dict[int, list[Emitted]]:
        """Track frames 1..n_frames (missing frames count as empty)."""
        last = n_frames if n_frames is not None else max(frames, default=0)
        return {f: self.step(frames.get(f, ())) for f in range(1, last + 1)}
