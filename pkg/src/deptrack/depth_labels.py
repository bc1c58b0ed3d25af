"""Instance-level soft depth labels from a dense depth map and an instance mask.

The label of an instance is the average depth over its visible pixels. A
synthetic depth oracle and mask oracle stand in for the frozen depth and
segmentation networks: both are rendered from a :class:`~deptrack.sim.SceneSpec`
with painter's-order occlusion, so the nearest target owns every pixel it
covers and the background sits at depth 1.0.

Pixel (row i, col j) covers the unit square [j, j+1) x [i, i+1); a box covers
the pixels whose centres (j + 0.5, i + 0.5) fall inside [x, x + w) x [y, y + h).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .geometry import BBox, LabeledBox, check_frame, iou
from .sim import STREAM_DEPTH, SceneSpec, render_frame, rng_for

BACKGROUND_DEPTH = 1.0


class DegenerateInstanceError(ValueError):
    """The instance has no pixels to average over."""


@dataclass(frozen=True)
class DepthMap:
    width: int
    height: int
    values: np.ndarray  # (height, width), row-major

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.height, self.width):
            raise ValueError(f"depth grid shape {v.shape} does not match {self.height}x{self.width}")
        if not np.isfinite(v).all() or v.min(initial=0.0) < 0.0 or v.max(initial=0.0) > 1.0:
            raise ValueError("depth values must be finite and lie in [0, 1]")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class InstanceMask:
    width: int
    height: int
    bits: np.ndarray  # (height, width) bool

    def __post_init__(self):
        b = np.asarray(self.bits)
        if b.shape != (self.height, self.width):
            raise ValueError(f"mask shape {b.shape} does not match {self.height}x{self.width}")
        if b.dtype != bool:
            if not np.isin(b, (0, 1)).all():
                raise ValueError("mask entries must be 0 or 1")
            b = b.astype(bool)
        object.__setattr__(self, "bits", b)

    @property
    def count(self) -> int:
        return int(self.bits.sum())


@dataclass(frozen=True)
class WindowSpec:
    window: int
    stride: int

    def __post_init__(self):
        if self.window < 1 or self.stride < 1:
            raise ValueError(f"window and stride must be >= 1, got {self.window}, {self.stride}")


@dataclass(frozen=True)
class SoftDepthLabel:
    instance_id: int
    frame: int
    value: float
    fallback: bool = False  # True when the box average replaced an empty mask

    def __post_init__(self):
        check_frame(self.frame)
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"label value must lie in [0, 1], got {self.value}")


def sliding_windows(n_frames: int, spec: WindowSpec) -> list[list[int]]:
    """Complete windows of 1-based frames; a trailing partial window is dropped."""
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    out = []
    start = 1
    while start + spec.window - 1 <= n_frames:
        out.append(list(range(start, start + spec.window)))
        start += spec.stride
    return out


def covered_frames(n_frames: int, spec: WindowSpec) -> list[int]:
    return sorted({f for w in sliding_windows(n_frames, spec) for f in w})


def _check_dims(d: DepthMap, m: InstanceMask) -> None:
    if (d.width, d.height) != (m.width, m.height):
        raise ValueError(f"mask {m.width}x{m.height} does not match depth map {d.width}x{d.height}")


def instance_depth(d: DepthMap, m: InstanceMask) -> DepthMap:
    _check_dims(d, m)
    return DepthMap(d.width, d.height, np.where(m.bits, d.values, 0.0))


def exact_mean(values: np.ndarray) -> float:
    """Correctly rounded mean of non-negative finite doubles.

    Each value is split as mantissa * 2**exp with an integer 53-bit mantissa;
    mantissas are summed exactly per exponent, so the only rounding is the
    final integer division.
    """
    v = np.asarray(values, dtype=float).ravel()
    n = v.size
    if n == 0:
        raise DegenerateInstanceError("mean of an empty set")
    mant, exp = np.frexp(v)
    m = (mant * 2.0 ** 53).astype(np.int64)
    hi, lo = m >> 26, m & ((1 << 26) - 1)
    e_min = int(exp.min())
    total = 0
    for e in np.unique(exp):
        sel = exp == e
        s = (int(hi[sel].sum()) << 26) + int(lo[sel].sum())
        total += s << (int(e) - e_min)
    k = e_min - 53
    if k >= 0:
        return (total << k) / n
    return total / (n << -k)


def soft_label(d: DepthMap, m: InstanceMask) -> float:
    _check_dims(d, m)
    if not m.bits.any():
        raise DegenerateInstanceError("instance mask is empty")
    return exact_mean(d.values[m.bits])


def box_pixels(box: BBox, width: int, height: int) -> tuple[slice, slice]:
    """Row and column slices of the pixels whose centres lie inside the box."""
    c0 = max(0, int(np.ceil(box.x - 0.5)))
    c1 = min(width, int(np.ceil(box.x2 - 0.5)))
    r0 = max(0, int(np.ceil(box.y - 0.5)))
    r1 = min(height, int(np.ceil(box.y2 - 0.5)))
    return slice(r0, max(r0, r1)), slice(c0, max(c0, c1))


def box_mask(box: BBox, width: int, height: int) -> InstanceMask:
    bits = np.zeros((height, width), dtype=bool)
    bits[box_pixels(box, width, height)] = True
    return InstanceMask(width, height, bits)


def box_average(d: DepthMap, box: BBox) -> float:
    """Baseline label: mean depth of every pixel inside the box, whoever owns it."""
    return soft_label(d, box_mask(box, d.width, d.height))


# ------------------------------------------------------------ synthetic oracles

def _painted(scene: SceneSpec, frame: int) -> tuple[list[LabeledBox], np.ndarray]:
    """Id map: each pixel holds the id of the nearest covering target, 0 for background."""
    boxes = render_frame(scene, frame)
    ids = np.zeros((scene.height, scene.width), dtype=np.int64)
    # far to near so nearer targets overwrite
    for lb in sorted(boxes, key=lambda b: (b.depth, b.id), reverse=True):
        ids[box_pixels(lb.box, scene.width, scene.height)] = lb.id
    return boxes, ids


def id_map(scene: SceneSpec, frame: int) -> np.ndarray:
    return _painted(scene, frame)[1]


def _render_depth(scene: SceneSpec, frame: int, boxes, ids) -> DepthMap:
    depth = np.full((scene.height, scene.width), BACKGROUND_DEPTH)
    rng = rng_for(scene.seed, frame, STREAM_DEPTH)
    noise = rng.normal(0.0, 1.0, depth.shape) if scene.depth_noise > 0 else None
    for lb in boxes:
        sel = ids == lb.id
        if noise is None:
            depth[sel] = lb.depth
        else:
            depth[sel] = np.clip(lb.depth + scene.depth_noise * noise[sel], 0.0, 1.0)
    return DepthMap(scene.width, scene.height, depth)


def synth_depth_oracle(scene: SceneSpec, frame: int) -> DepthMap:
    """Dense depth of one frame: target depth plus per-pixel noise, background 1.0."""
    check_frame(frame)
    boxes, ids = _painted(scene, frame)
    return _render_depth(scene, frame, boxes, ids)


def _prompt_target(boxes: Sequence[LabeledBox], box: BBox) -> Optional[LabeledBox]:
    best, best_iou = None, 0.0
    for lb in sorted(boxes, key=lambda b: b.id):
        v = iou(lb.box, box)
        if v > best_iou:
            best, best_iou = lb, v
    return best


def _mask_for(scene, boxes, ids, box) -> InstanceMask:
    t = _prompt_target(boxes, box)
    bits = ids == t.id if t is not None else np.zeros(ids.shape, dtype=bool)
    return InstanceMask(scene.width, scene.height, bits)


def synth_mask_oracle(scene: SceneSpec, frame: int, box: BBox) -> InstanceMask:
    """Visible pixels of the target whose box best overlaps the prompt; empty if none overlaps."""
    check_frame(frame)
    boxes, ids = _painted(scene, frame)
    return _mask_for(scene, boxes, ids, box)


def label_frame(scene: SceneSpec, frame: int, prompts: Iterable[tuple[int, BBox]]) -> list[SoftDepthLabel]:
    """Soft labels for prompted instances of one frame.

    An instance whose mask comes back empty (fully hidden) is labelled with
    the box average instead and flagged.
    """
    boxes, ids = _painted(scene, frame)
    depth = _render_depth(scene, frame, boxes, ids)
    out = []
    for inst, box in prompts:
        mask = _mask_for(scene, boxes, ids, box)
        try:
            out.append(SoftDepthLabel(inst, frame, soft_label(depth, mask)))
        except DegenerateInstanceError:
            try:
                value = box_average(depth, box)
            except DegenerateInstanceError:
                value = BACKGROUND_DEPTH  # box falls between pixel centres
            out.append(SoftDepthLabel(inst, frame, value, fallback=True))
    return out


def label_sequence(scene: SceneSpec, gt: Iterable[LabeledBox], spec: WindowSpec) -> list[SoftDepthLabel]:
    """Label every gt box on the frames covered by complete windows."""
    by_frame: dict[int, list[tuple[int, BBox]]] = {}
    for lb in gt:
        by_frame.setdefault(lb.frame, []).append((lb.id, lb.box))
    out = []
    for f in covered_frames(scene.frames, spec):
        if f in by_frame:
            out.extend(label_frame(scene, f, sorted(by_frame[f], key=lambda p: p[0])))
    return out
