"""MOT evaluation: CLEAR-MOT (MOTA, IDSW), IDF1 and HOTA with DetA / AssA.

Every per-sequence result is kept as raw counts (:class:`SequenceCounts`) so
several sequences can be pooled by summation before any ratio is formed.
Ratios whose denominator is zero evaluate to 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .assignment import hungarian
from .geometry import BBox, LabeledBox, boxes_to_array, iou, iou_matrix

ALPHAS = np.arange(1, 20) * 0.05
_EPS = np.finfo(float).eps


@dataclass
class FrameMatch:
    matches: dict[int, int]  # gt id -> pred id
    fp: int
    fn: int
    switches: list[int]  # gt ids whose matched pred id changed


@dataclass
class MetricReport:
    hota: float
    deta: float
    assa: float
    idf1: float
    mota: float
    fp: int
    fn: int
    idsw: int
    gt_count: int
    deta_alpha: np.ndarray = field(repr=False, default=None)
    assa_alpha: np.ndarray = field(repr=False, default=None)

    def row(self, name: str) -> str:
        return (f"{name},{self.hota:.6f},{self.deta:.6f},{self.assa:.6f},{self.idf1:.6f},"
                f"{self.mota:.6f},{self.fp},{self.fn},{self.idsw}")


REPORT_HEADER = "sequence,HOTA,DetA,AssA,IDF1,MOTA,FP,FN,IDSW"


def _ratio(num, den):
    return num / den if den else 0.0


def clear_match(gt_frame: Mapping[int, BBox], pred_frame: Mapping[int, BBox],
                prev_matches: Mapping[int, int], iou_threshold: float = 0.5) -> FrameMatch:
    """CLEAR-MOT correspondence for one frame.

    ``prev_matches`` maps each gt id to the pred id it was last matched with.
    Those pairs are kept when both are present and still overlap by at least
    ``iou_threshold``; the remaining ids are matched by Hungarian on 1 - IoU.
    """
    matches: dict[int, int] = {}
    taken: set[int] = set()
    for g in sorted(gt_frame):
        p = prev_matches.get(g)
        if p is not None and p in pred_frame and p not in taken:
            if iou(gt_frame[g], pred_frame[p]) >= iou_threshold:
                matches[g] = p
                taken.add(p)

    gs = [g for g in sorted(gt_frame) if g not in matches]
    ps = [p for p in sorted(pred_frame) if p not in taken]
    if gs and ps:
        sim = iou_matrix(boxes_to_array([gt_frame[g] for g in gs]), boxes_to_array([pred_frame[p] for p in ps]))
        cost = np.where(sim >= iou_threshold, 1.0 - sim, 2.0)
        for r, c in hungarian(cost).pairs:
            if sim[r, c] >= iou_threshold:
                matches[gs[r]] = ps[c]

    switches = sorted(g for g, p in matches.items() if g in prev_matches and prev_matches[g] != p)
    return FrameMatch(matches, len(pred_frame) - len(matches), len(gt_frame) - len(matches), switches)


def mota(fn: int, fp: int, idsw: int, gt_count: int) -> float:
    if gt_count <= 0:
        raise ValueError("MOTA is undefined without ground-truth boxes")
    return 100.0 * (1.0 - (fn + fp + idsw) / gt_count)


@dataclass
class SequenceCounts:
    """Raw counts behind every metric for one or more pooled sequences."""

    fp: int = 0
    fn: int = 0
    idsw: int = 0
    gt_count: int = 0
    pred_count: int = 0
    idtp: int = 0
    hota_tp: np.ndarray = field(default_factory=lambda: np.zeros(len(ALPHAS)))
    hota_fn: np.ndarray = field(default_factory=lambda: np.zeros(len(ALPHAS)))
    hota_fp: np.ndarray = field(default_factory=lambda: np.zeros(len(ALPHAS)))
    hota_ass: np.ndarray = field(default_factory=lambda: np.zeros(len(ALPHAS)))

    def __add__(self, other: "SequenceCounts") -> "SequenceCounts":
        return SequenceCounts(
            self.fp + other.fp, self.fn + other.fn, self.idsw + other.idsw,
            self.gt_count + other.gt_count, self.pred_count + other.pred_count, self.idtp + other.idtp,
            self.hota_tp + other.hota_tp, self.hota_fn + other.hota_fn,
            self.hota_fp + other.hota_fp, self.hota_ass + other.hota_ass,
        )

    @property
    def idfp(self) -> int:
        return self.pred_count - self.idtp

    @property
    def idfn(self) -> int:
        return self.gt_count - self.idtp

    def report(self) -> MetricReport:
        tp, fn, fp = self.hota_tp, self.hota_fn, self.hota_fp
        den = tp + fn + fp
        det_a = np.divide(tp, den, out=np.zeros_like(tp), where=den > 0)
        ass_a = np.divide(self.hota_ass, tp, out=np.zeros_like(tp), where=tp > 0)
        hota_a = np.sqrt(det_a * ass_a)
        idf1 = _ratio(200 * self.idtp, 2 * self.idtp + self.idfp + self.idfn)  # int / int rounds once
        m = mota(self.fn, self.fp, self.idsw, self.gt_count) if self.gt_count else 0.0
        return MetricReport(
            hota=100.0 * float(hota_a.mean()), deta=100.0 * float(det_a.mean()),
            assa=100.0 * float(ass_a.mean()), idf1=idf1, mota=m,
            fp=self.fp, fn=self.fn, idsw=self.idsw, gt_count=self.gt_count,
            deta_alpha=det_a, assa_alpha=ass_a,
        )


Frames = Mapping[int, Mapping[int, BBox]]


def to_frames(boxes: Iterable[LabeledBox]) -> dict[int, dict[int, BBox]]:
    out: dict[int, dict[int, BBox]] = {}
    for b in boxes:
        frame = out.setdefault(b.frame, {})
        if b.id in frame:
            raise ValueError(f"duplicate id {b.id} in frame {b.frame}")
        frame[b.id] = b.box
    return out


def clear_counts(gt: Frames, pred: Frames, iou_threshold: float = 0.5) -> SequenceCounts:
    c = SequenceCounts()
    last: dict[int, int] = {}
    for f in sorted(set(gt) | set(pred)):
        g, p = gt.get(f, {}), pred.get(f, {})
        fm = clear_match(g, p, last, iou_threshold)
        c.fp += fm.fp
        c.fn += fm.fn
        c.idsw += len(fm.switches)
        c.gt_count += len(g)
        c.pred_count += len(p)
        last.update(fm.matches)
    return c


def _id_index(frames: Frames) -> dict[int, int]:
    return {i: k for k, i in enumerate(sorted({i for fr in frames.values() for i in fr}))}


def idtp_count(gt: Frames, pred: Frames, iou_threshold: float = 0.5) -> int:
    """True positives of the best global one-to-one gt-id/pred-id mapping."""
    gi, pi = _id_index(gt), _id_index(pred)
    if not gi or not pi:
        return 0
    overlap = np.zeros((len(gi), len(pi)))
    for f, g in gt.items():
        p = pred.get(f, {})
        if not g or not p:
            continue
        gids, pids = sorted(g), sorted(p)
        sim = iou_matrix(boxes_to_array([g[i] for i in gids]), boxes_to_array([p[i] for i in pids]))
        rows, cols = np.nonzero(sim >= iou_threshold)
        for r, k in zip(rows, cols):
            overlap[gi[gids[r]], pi[pids[k]]] += 1
    a = hungarian(-overlap)
    return int(sum(overlap[r, k] for r, k in a.pairs))


def idf1(gt: Frames, pred: Frames, iou_threshold: float = 0.5) -> float:
    tp = idtp_count(gt, pred, iou_threshold)
    n = sum(len(v) for v in gt.values()) + sum(len(v) for v in pred.values())
    return float(_ratio(200 * tp, n))


def _hota_match(elig: np.ndarray, score: np.ndarray) -> list[tuple[int, int]]:
    # maximise the number of eligible matches first, then the summed score
    if not elig.any():
        return []
    bonus = min(elig.shape) + 1.0
    cost = np.where(elig, -(bonus + score), 0.0)
    return [(r, c) for r, c in hungarian(cost).pairs if elig[r, c]]


def hota_counts(gt: Frames, pred: Frames) -> SequenceCounts:
    gi, pi = _id_index(gt), _id_index(pred)
    n_a = len(ALPHAS)
    c = SequenceCounts()
    frames = sorted(set(gt) | set(pred))

    # global alignment score between every gt id and pred id
    potential = np.zeros((len(gi), len(pi)))
    gt_cnt = np.zeros(len(gi))
    pr_cnt = np.zeros(len(pi))
    per_frame = []
    for f in frames:
        g, p = gt.get(f, {}), pred.get(f, {})
        gids, pids = sorted(g), sorted(p)
        gx = np.array([gi[i] for i in gids], dtype=int)
        px = np.array([pi[i] for i in pids], dtype=int)
        sim = iou_matrix(boxes_to_array([g[i] for i in gids]), boxes_to_array([p[i] for i in pids]))
        per_frame.append((gx, px, sim))
        gt_cnt[gx] += 1
        pr_cnt[px] += 1
        if len(gx) and len(px):
            denom = sim.sum(0)[None, :] + sim.sum(1)[:, None] - sim
            sim_iou = np.divide(sim, denom, out=np.zeros_like(sim), where=denom > _EPS)
            potential[np.ix_(gx, px)] += sim_iou
    align = potential / np.maximum(gt_cnt[:, None] + pr_cnt[None, :] - potential, _EPS)

    match_counts = np.zeros((n_a, len(gi), len(pi)))
    for gx, px, sim in per_frame:
        if len(gx) == 0 or len(px) == 0:
            c.hota_fn += len(gx)
            c.hota_fp += len(px)
            continue
        score = align[np.ix_(gx, px)] * sim
        cache: dict[bytes, list] = {}
        for a, alpha in enumerate(ALPHAS):
            elig = sim >= alpha - _EPS
            key = elig.tobytes()
            if key not in cache:
                cache[key] = _hota_match(elig, score)
            pairs = cache[key]
            c.hota_tp[a] += len(pairs)
            c.hota_fn[a] += len(gx) - len(pairs)
            c.hota_fp[a] += len(px) - len(pairs)
            for r, k in pairs:
                match_counts[a, gx[r], px[k]] += 1

    for a in range(n_a):
        mc = match_counts[a]
        ass = mc / np.maximum(1.0, gt_cnt[:, None] + pr_cnt[None, :] - mc)
        c.hota_ass[a] = float((mc * ass).sum())
    return c


def hota(gt: Frames, pred: Frames) -> tuple[float, float, float]:
    r = hota_counts(gt, pred).report()
    return r.hota, r.deta, r.assa


def sequence_counts(gt: Frames, pred: Frames, iou_threshold: float = 0.5) -> SequenceCounts:
    c = clear_counts(gt, pred, iou_threshold)
    h = hota_counts(gt, pred)
    c.idtp = idtp_count(gt, pred, iou_threshold)
    c.hota_tp, c.hota_fn, c.hota_fp, c.hota_ass = h.hota_tp, h.hota_fn, h.hota_fp, h.hota_ass
    return c


def evaluate_boxes(gt: Iterable[LabeledBox], pred: Iterable[LabeledBox], iou_threshold: float = 0.5) -> MetricReport:
    return sequence_counts(to_frames(gt), to_frames(pred), iou_threshold).report()


def pool(counts: Sequence[SequenceCounts]) -> SequenceCounts:
    total = SequenceCounts()
    for c in counts:
        total = total + c
    return total
