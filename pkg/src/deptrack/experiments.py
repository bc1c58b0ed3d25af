"""Benchmark-suite runs: tracking + evaluation per scene, and the two ablation sweeps."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .config import RunConfig
from .depth_labels import WindowSpec, covered_frames, label_frame
from .geometry import BBox, Detection, LabeledBox, boxes_to_array, iou_matrix
from .metrics import MetricReport, SequenceCounts, pool, sequence_counts
from .sim import SceneSpec, simulate
from .tracker import Tracker, TrackerConfig

SWEEP_METRICS = "HOTA,DetA,AssA,IDF1,MOTA,FP,FN,IDSW"


@dataclass
class SequenceData:
    scene: SceneSpec
    gt: dict[int, list[LabeledBox]]
    dets: dict[int, list[Detection]]

    @property
    def name(self) -> str:
        return f"{self.scene.name}_{self.scene.seed}"

    def gt_frames(self) -> dict[int, dict[int, BBox]]:
        return {f: {b.id: b.box for b in bs} for f, bs in self.gt.items() if bs}


def load_suite(scenes: Sequence[SceneSpec]) -> list[SequenceData]:
    return [SequenceData(sc, *simulate(sc)) for sc in scenes]


def track_sequence(dets: dict[int, Sequence[Detection]], n_frames: int, cfg: TrackerConfig,
                   kind: str = "byte") -> dict[int, dict[int, BBox]]:
    out = Tracker(cfg, kind).run(dets, n_frames)
    return {f: {e.id: e.box for e in es} for f, es in out.items() if es}


def run_suite(data: Sequence[SequenceData], cfg: TrackerConfig, kind: str = "byte",
              dets: Optional[Sequence[dict]] = None) -> dict[str, SequenceCounts]:
    """Per-sequence raw counts; ``dets`` optionally replaces each sequence's detections."""
    out = {}
    for k, seq in enumerate(data):
        d = seq.dets if dets is None else dets[k]
        pred = track_sequence(d, seq.scene.frames, cfg, kind)
        out[seq.name] = sequence_counts(seq.gt_frames(), pred)
    return out


def pooled(counts: dict[str, SequenceCounts]) -> MetricReport:
    return pool(list(counts.values())).report()


def _metric_cells(r: MetricReport) -> str:
    return f"{r.hota:.6f},{r.deta:.6f},{r.assa:.6f},{r.idf1:.6f},{r.mota:.6f},{r.fp},{r.fn},{r.idsw}"


@dataclass
class SweepRow:
    setting: tuple
    report: MetricReport


def gamma_sweep(cfg: RunConfig, data: Optional[Sequence[SequenceData]] = None) -> list[SweepRow]:
    """Pooled metrics for each gamma with lambda = 1 - gamma."""
    data = data if data is not None else load_suite(cfg.scene.suite())
    rows = []
    for g in cfg.sweep.gamma_list:
        tc = replace(cfg.tracker, gamma=g, lam=1.0 - g)
        rows.append(SweepRow((g, 1.0 - g), pooled(run_suite(data, tc, cfg.sweep.tracker))))
    return rows


def format_gamma_sweep(rows: Sequence[SweepRow]) -> str:
    lines = [f"gamma,lambda,{SWEEP_METRICS}"]
    lines += [f"{g:.2f},{lam:.2f},{_metric_cells(r.report)}" for (g, lam), r in ((row.setting, row) for row in rows)]
    return "\n".join(lines) + "\n"


def frame_labels(seq: SequenceData) -> dict[int, dict[int, float]]:
    """Soft label of every gt instance on every frame, keyed frame -> id."""
    out = {}
    for f in range(1, seq.scene.frames + 1):
        prompts = [(b.id, b.box) for b in seq.gt.get(f, [])]
        out[f] = {lab.instance_id: lab.value for lab in label_frame(seq.scene, f, prompts)} if prompts else {}
    return out


def relabel_detections(seq: SequenceData, labels: dict[int, dict[int, float]], covered: set[int]):
    """Detections whose depth is the soft label of their best-overlapping gt instance.

    Only frames inside a complete window are relabelled; elsewhere, and for
    detections that overlap no gt box, the detector depth is kept.
    """
    out = {}
    for f, ds in seq.dets.items():
        gts = seq.gt.get(f, [])
        if f not in covered or not ds or not gts:
            out[f] = list(ds)
            continue
        sim = iou_matrix(boxes_to_array([d.box for d in ds]), boxes_to_array([b.box for b in gts]))
        new = []
        for i, d in enumerate(ds):
            j = int(np.argmax(sim[i]))  # first maximum, gt sorted by id
            new.append(replace(d, depth=labels[f][gts[j].id]) if sim[i, j] > 0 else d)
        out[f] = new
    return out


def window_sweep(cfg: RunConfig, data: Optional[Sequence[SequenceData]] = None) -> list[SweepRow]:
    """Pooled metrics of the depth-enabled tracker fed soft labels under each (window, stride)."""
    data = data if data is not None else load_suite(cfg.scene.suite())
    labels = [frame_labels(seq) for seq in data]
    tc = replace(cfg.tracker, gamma=cfg.sweep.window_gamma, lam=1.0 - cfg.sweep.window_gamma)
    rows = []
    for spec in cfg.sweep.window_list:
        dets = [relabel_detections(seq, lab, set(covered_frames(seq.scene.frames, spec)))
                for seq, lab in zip(data, labels)]
        rows.append(SweepRow((spec.window, spec.stride), pooled(run_suite(data, tc, cfg.sweep.tracker, dets))))
    return rows


def format_window_sweep(rows: Sequence[SweepRow]) -> str:
    lines = [f"window,stride,{SWEEP_METRICS}"]
    lines += [f"{w},{s},{_metric_cells(row.report)}" for row in rows for w, s in [row.setting]]
    return "\n".join(lines) + "\n"


def window_spread(rows: Sequence[SweepRow]) -> float:
    """(max - min) / max of pooled HOTA across settings."""
    h = [r.report.hota for r in rows]
    return (max(h) - min(h)) / max(h) if max(h) > 0 else 0.0
