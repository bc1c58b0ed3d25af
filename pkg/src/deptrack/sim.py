"""Synthetic 3D scenes with occlusion and close-proximity events.

Perspective is the 1/z size law only: a target of base size (w, h) at depth
0.5 is drawn at (w, h) * 0.5 / z. Nearer targets (smaller z) occlude farther
ones. All randomness comes from numpy's PCG64 bit generator seeded through
``SeedSequence([seed, frame, stream])``; PCG64 is the documented algorithm
and the entropy words fully determine every draw.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .geometry import BBox, Detection, LabeledBox, check_frame, iou

Z_MIN, Z_MAX = 0.05, 1.0

# stream tags for SeedSequence
STREAM_LAYOUT = 0
STREAM_DETECT = 1
STREAM_DEPTH = 2

SCENARIOS = ("CROSSING", "OVERTAKE", "CROWD", "PARALLEL")


def rng_for(seed: int, *words: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, words)])))


@dataclass(frozen=True)
class TargetSpec:
    x: float
    y: float
    z: float
    vx: float = 0.0
    vy: float = 0.0
    vz: float = 0.0
    base_w: float = 40.0
    base_h: float = 100.0
    spawn: int = 1
    despawn: Optional[int] = None  # last live frame, inclusive
    sway_amp: float = 0.0  # optional sinusoidal lateral motion, pixels
    sway_period: float = 0.0
    sway_phase: float = 0.0

    def alive(self, frame: int) -> bool:
        return frame >= self.spawn and (self.despawn is None or frame <= self.despawn)

    def state(self, frame: int) -> tuple[float, float, float]:
        t = frame - self.spawn
        cx = self.x + self.vx * t
        if self.sway_amp and self.sway_period:
            cx += self.sway_amp * math.sin(2 * math.pi * t / self.sway_period + self.sway_phase)
        cy = self.y + self.vy * t
        z = min(max(self.z + self.vz * t, Z_MIN), Z_MAX)
        return cx, cy, z

    def box(self, frame: int) -> tuple[BBox, float]:
        cx, cy, z = self.state(frame)
        s = 0.5 / z
        return BBox.from_center(cx, cy, self.base_w * s, self.base_h * s), z


@dataclass(frozen=True)
class DetectorModel:
    jitter_sigma: float = 1.5
    miss_rate_base: float = 0.02
    miss_rate_occluded: float = 0.3
    score_noise: float = 0.1
    merge_occluded: bool = False

    def __post_init__(self):
        for name in ("miss_rate_base", "miss_rate_occluded", "score_noise"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.jitter_sigma < 0:
            raise ValueError("jitter_sigma must be non-negative")

    @classmethod
    def noiseless(cls) -> "DetectorModel":
        return cls(jitter_sigma=0.0, miss_rate_base=0.0, miss_rate_occluded=0.0, score_noise=0.0)


@dataclass(frozen=True)
class SceneSpec:
    seed: int
    frames: int
    targets: tuple[TargetSpec, ...]
    width: int = 640
    height: int = 360
    detector: DetectorModel = field(default_factory=DetectorModel)
    depth_noise: float = 0.05
    name: str = "scene"

    def __post_init__(self):
        if self.frames < 1:
            raise ValueError("a scene needs at least one frame")
        if not self.targets:
            raise ValueError("a scene needs at least one target")
        if self.depth_noise < 0:
            raise ValueError("depth_noise must be non-negative")


def _union_area(rects: list[tuple[float, float, float, float]]) -> float:
    """Area of a union of (x1, y1, x2, y2) rectangles by coordinate compression."""
    if not rects:
        return 0.0
    xs = sorted({r[0] for r in rects} | {r[2] for r in rects})
    ys = sorted({r[1] for r in rects} | {r[3] for r in rects})
    area = 0.0
    for i in range(len(xs) - 1):
        xm = 0.5 * (xs[i] + xs[i + 1])
        for j in range(len(ys) - 1):
            ym = 0.5 * (ys[j] + ys[j + 1])
            if any(r[0] <= xm < r[2] and r[1] <= ym < r[3] for r in rects):
                area += (xs[i + 1] - xs[i]) * (ys[j + 1] - ys[j])
    return area


def visibility(box: BBox, occluders: list[BBox]) -> float:
    clipped = []
    for o in occluders:
        x1, y1 = max(box.x, o.x), max(box.y, o.y)
        x2, y2 = min(box.x2, o.x2), min(box.y2, o.y2)
        if x2 > x1 and y2 > y1:
            clipped.append((x1, y1, x2, y2))
    v = 1.0 - _union_area(clipped) / box.area
    return v if v > 1e-12 else 0.0  # cancellation leaves ~1e-16 for fully covered boxes


def depth_order(boxes: list[LabeledBox]) -> list[LabeledBox]:
    """Nearest first; ties resolved by id."""
    return sorted(boxes, key=lambda b: (b.depth, b.id))


def render_frame(spec: SceneSpec, frame: int) -> list[LabeledBox]:
    """Ground truth of one frame: every live target whose box touches the image.

    Target ids are 1-based positions in ``spec.targets``. Visibility is the
    fraction of a box not covered by nearer boxes.
    """
    check_frame(frame)
    if frame > spec.frames:
        raise ValueError(f"frame {frame} outside scene of {spec.frames} frames")
    raw = []
    for k, t in enumerate(spec.targets, start=1):
        if not t.alive(frame):
            continue
        b, z = t.box(frame)
        if b.x2 <= 0 or b.y2 <= 0 or b.x >= spec.width or b.y >= spec.height:
            continue
        raw.append(LabeledBox(frame, k, b, z))
    ordered = depth_order(raw)
    out = []
    for i, lb in enumerate(ordered):
        vis = visibility(lb.box, [o.box for o in ordered[:i]])
        out.append(replace(lb, visibility=vis))
    out.sort(key=lambda b: b.id)
    return out


def _detect(spec: SceneSpec, frame: int, gt: list[LabeledBox]) -> list[tuple[Detection, tuple[int, ...]]]:
    dm = spec.detector
    rng = rng_for(spec.seed, frame, STREAM_DETECT)
    raw = []
    for lb in sorted(gt, key=lambda b: b.id):
        # fixed draw count per target keeps streams aligned across settings
        u_miss, u_score = rng.random(2)
        jit = rng.normal(0.0, 1.0, 4)
        dz = rng.normal(0.0, 1.0)
        vis = lb.visibility
        p_miss = dm.miss_rate_occluded if vis < 0.5 else dm.miss_rate_base
        if vis <= 0.0 or u_miss < p_miss:
            continue
        b = lb.box
        s = dm.jitter_sigma
        w = max(1.0, b.w + s * jit[2])
        h = max(1.0, b.h + s * jit[3])
        cx = b.x + b.w / 2 + s * jit[0]
        cy = b.y + b.h / 2 + s * jit[1]
        score = vis * (1.0 - dm.score_noise * u_score)
        depth = min(max(lb.depth + spec.depth_noise * dz, 0.0), 1.0)
        raw.append((BBox.from_center(cx, cy, w, h), score, depth, lb.depth, (lb.id,)))

    if dm.merge_occluded:
        raw = _merge(raw)
    return [(Detection(b, min(max(sc, 0.0), 1.0), d), src) for b, sc, d, _, src in raw]


def _merge(raw):
    while True:
        best, pair = 0.7, None
        for i in range(len(raw)):
            for j in range(i + 1, len(raw)):
                v = iou(raw[i][0], raw[j][0])
                if v > best:
                    best, pair = v, (i, j)
        if pair is None:
            return raw
        a, b = raw[pair[0]], raw[pair[1]]
        near = a if (a[3], a[4]) <= (b[3], b[4]) else b
        x1, y1 = min(a[0].x, b[0].x), min(a[0].y, b[0].y)
        x2, y2 = max(a[0].x2, b[0].x2), max(a[0].y2, b[0].y2)
        # one box for two instances: the detector is unsure, confidence is the mean
        merged = (BBox(x1, y1, x2 - x1, y2 - y1), 0.5 * (a[1] + b[1]), near[2], near[3], tuple(sorted(a[4] + b[4])))
        raw = [r for k, r in enumerate(raw) if k not in pair]
        raw.insert(min(pair), merged)


def detect(spec: SceneSpec, frame: int, gt: list[LabeledBox]) -> list[Detection]:
    """Noisy detector output for one frame of ground truth."""
    return [d for d, _ in _detect(spec, frame, gt)]


def detect_with_sources(spec: SceneSpec, frame: int, gt: list[LabeledBox]):
    """Like :func:`detect`, also returning the gt ids behind each detection."""
    return _detect(spec, frame, gt)


# ---------------------------------------------------------------- scenarios

def _crossing(rng, frames):
    y = 200 + rng.uniform(-10, 10)
    za, zb = rng.uniform(0.3, 0.4), rng.uniform(0.65, 0.8)
    speed = rng.uniform(2.0, 3.0)
    # far target gets a larger base size so projected boxes are similar
    span = speed * (frames - 1)
    x0 = 320 - span / 2
    a = TargetSpec(x0, y, za, vx=speed, base_w=30 * za / 0.35, base_h=75 * za / 0.35)
    b = TargetSpec(x0 + span, y + rng.uniform(-4, 4), zb, vx=-speed,
                   base_w=27 * zb / 0.35, base_h=68 * zb / 0.35)
    return [b, a]


def _overtake(rng, frames):
    y = 200 + rng.uniform(-10, 10)
    za, zb = rng.uniform(0.3, 0.38), rng.uniform(0.6, 0.75)
    va = rng.uniform(0.5, 1.2)
    vb = va + rng.uniform(2.0, 3.0)
    a = TargetSpec(250 + rng.uniform(-10, 10), y, za, vx=va, base_w=30 * za / 0.35, base_h=75 * za / 0.35)
    b = TargetSpec(a.x - (vb - va) * frames / 2, y + rng.uniform(-6, 6), zb, vx=vb,
                   base_w=26 * zb / 0.35, base_h=66 * zb / 0.35)
    return [a, b]


def _crowd(rng, frames):
    """Two near walkers, each with a pair of farther targets crossing behind it.

    At one site the crossing pair sits at clearly different depths, at the
    other at nearly equal depths, so the crowd holds both the case where depth
    separates two boxes and the case where it cannot.
    """
    out = []
    for cx, (z1, z2) in ((200.0, (0.55, 0.85)), (440.0, (0.7, 0.75))):
        y = 180 + rng.uniform(-15, 15)
        zo = rng.uniform(0.26, 0.32)
        vo = rng.uniform(-0.3, 0.3)
        out.append(TargetSpec(cx, y, zo, vx=vo, base_w=34 * zo / 0.35, base_h=84 * zo / 0.35))
        tc = rng.uniform(0.35, 0.65) * frames
        # crossing point sits off the walker's centre so both crossers stay partly visible
        xc = cx + vo * tc + rng.choice([-1.0, 1.0]) * 14.0
        for k, zbase in enumerate((z1, z2)):
            z = zbase + rng.uniform(-0.03, 0.03)
            v = (1 if k == 0 else -1) * rng.uniform(1.0, 2.0)
            out.append(TargetSpec(xc - v * tc, y + rng.uniform(-4, 4), z, vx=v,
                                  base_w=30 * z / 0.35, base_h=75 * z / 0.35))
    return out


def _parallel(rng, frames):
    """Two targets walking side by side, swaying together; the far one is partly hidden."""
    y = 200 + rng.uniform(-10, 10)
    za = rng.uniform(0.3, 0.35)
    zb = za + rng.uniform(0.35, 0.45)
    v = rng.uniform(1.0, 2.0)
    x0 = 320 - v * frames / 2
    period, amp = rng.uniform(40, 60), rng.uniform(10, 20)
    gap = rng.uniform(12, 22)
    a = TargetSpec(x0, y, za, vx=v, base_w=30 * za / 0.35, base_h=75 * za / 0.35,
                   sway_amp=amp, sway_period=period)
    b = TargetSpec(x0 + gap, y + rng.uniform(-5, 5), zb, vx=v, base_w=28 * zb / 0.35, base_h=72 * zb / 0.35,
                   sway_amp=amp, sway_period=period, sway_phase=0.3)
    return [a, b]


_BUILDERS = {"CROSSING": _crossing, "OVERTAKE": _overtake, "CROWD": _crowd, "PARALLEL": _parallel}
_MERGE_DEFAULT = {"CROSSING": False, "OVERTAKE": True, "CROWD": True, "PARALLEL": False}


def make_scenario(name: str, seed: int, frames: int = 120, width: int = 640, height: int = 360,
                  detector: Optional[DetectorModel] = None, depth_noise: float = 0.05,
                  merge: Optional[bool] = None) -> SceneSpec:
    name = name.upper()
    if name not in _BUILDERS:
        raise ValueError(f"unknown scenario {name!r}; choose from {SCENARIOS}")
    rng = rng_for(seed, STREAM_LAYOUT, SCENARIOS.index(name))
    targets = tuple(_BUILDERS[name](rng, frames))
    det = detector if detector is not None else DetectorModel()
    if merge is None:
        merge = _MERGE_DEFAULT[name]
    det = replace(det, merge_occluded=merge)
    return SceneSpec(seed=seed, frames=frames, targets=targets, width=width, height=height,
                     detector=det, depth_noise=depth_noise, name=name)


def benchmark_suite(seed: int = 0, n_seeds: int = 5, scenarios=SCENARIOS, **kwargs) -> dict[str, list[SceneSpec]]:
    """Every named scenario at seeds ``seed .. seed + n_seeds - 1``."""
    return {name: [make_scenario(name, seed + k, **kwargs) for k in range(n_seeds)] for name in scenarios}


def render_sequence(spec: SceneSpec) -> dict[int, list[LabeledBox]]:
    return {f: render_frame(spec, f) for f in range(1, spec.frames + 1)}


def simulate(spec: SceneSpec):
    """Ground truth (visible targets only) and detections for the whole scene."""
    gt, dets = {}, {}
    for f in range(1, spec.frames + 1):
        boxes = render_frame(spec, f)
        gt[f] = [b for b in boxes if b.visibility > 0.0]
        dets[f] = detect(spec, f, boxes)
    return gt, dets
