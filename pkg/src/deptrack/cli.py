"""Command line: simulate, label, track, eval, sweep and inspect-head.

Exit codes: 0 success, 2 configuration or usage error, 3 I/O error,
4 data-contract violation (malformed or inconsistent input data).
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import depth_head as dh
from .config import ConfigError, RunConfig, format_config, read_config, with_overrides
from .depth_labels import WindowSpec, covered_frames, label_frame
from .experiments import format_gamma_sweep, format_window_sweep, gamma_sweep, window_sweep
from .geometry import BBox, Detection, LabeledBox
from .io import LabelRecord, MotRecord, NO_DEPTH, read_mot, write_labels, write_mot
from .metrics import REPORT_HEADER, pool, sequence_counts, to_frames
from .sim import simulate
from .tracker import Tracker

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_DATA = 0, 2, 3, 4


class DataError(ValueError):
    """Input files are individually valid but inconsistent with each other."""


def _load_config(path: Optional[Path]) -> RunConfig:
    return read_config(path) if path is not None else RunConfig()


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(text)


def _depth_or_none(v: float) -> Optional[float]:
    return None if v == NO_DEPTH else v


# ---------------------------------------------------------------- commands

def cmd_simulate(args, wd: Path) -> int:
    cfg = _load_config(args.config)
    if args.seed is not None:
        cfg = with_overrides(cfg, scene__seed=args.seed)
    out = wd / args.out_dir
    print("sequence,frames,targets,gt_boxes,detections")
    for sc in cfg.scene.suite():
        gt, dets = simulate(sc)
        d = out / f"{sc.name}_{sc.seed}"
        gt_rows = [MotRecord(f, b.id, b.box.x, b.box.y, b.box.w, b.box.h, 1.0, b.depth)
                   for f, bs in gt.items() for b in bs]
        det_rows = [MotRecord(f, -1, x.box.x, x.box.y, x.box.w, x.box.h, x.score, x.depth)
                    for f, xs in dets.items() for x in xs]
        write_mot(gt_rows, d / "gt.txt")
        write_mot(det_rows, d / "det.txt")
        scene_cfg = with_overrides(cfg, scene__scenarios=sc.name, scene__seed=sc.seed, scene__seeds=1)
        _write_text(d / "scene.cfg", format_config(scene_cfg))
        print(f"{d.name},{sc.frames},{len(sc.targets)},{len(gt_rows)},{len(det_rows)}")
    return EXIT_OK


def cmd_label(args, wd: Path) -> int:
    cfg = read_config(wd / args.scene)
    names = cfg.scene.scenario_list
    if len(names) != 1:
        raise ConfigError(f"scene.scenarios must name exactly one scenario for labelling, got {names}")
    scene = cfg.scene.scene(names[0], cfg.scene.seed)
    spec = WindowSpec(args.window if args.window is not None else cfg.label.window,
                      args.stride if args.stride is not None else cfg.label.stride)
    gt = read_mot(wd / args.inp)
    by_frame: dict[int, list[MotRecord]] = {}
    for r in gt:
        if r.frame > scene.frames:
            raise DataError(f"gt frame {r.frame} is outside the {scene.frames}-frame scene")
        by_frame.setdefault(r.frame, []).append(r)
    rows = []
    for f in covered_frames(scene.frames, spec):
        recs = {r.id: r for r in by_frame.get(f, [])}
        labels = label_frame(scene, f, [(i, BBox(r.x, r.y, r.w, r.h)) for i, r in sorted(recs.items())])
        for lab in labels:
            r = recs[lab.instance_id]
            if lab.fallback:
                print(f"warning: frame {f} id {r.id}: empty mask, box-average fallback", file=sys.stderr)
            rows.append(LabelRecord(MotRecord(f, r.id, r.x, r.y, r.w, r.h, r.conf, lab.value), lab.fallback))
    write_labels(rows, wd / args.out)
    return EXIT_OK


def cmd_track(args, wd: Path) -> int:
    cfg = _load_config(wd / args.config if args.config else None)
    recs = read_mot(wd / args.det)
    frames: dict[int, list[Detection]] = {}
    for r in recs:
        frames.setdefault(r.frame, []).append(Detection(BBox(r.x, r.y, r.w, r.h), r.conf, _depth_or_none(r.depth)))
    out = Tracker(cfg.tracker, args.tracker).run(frames)
    rows = [MotRecord(f, e.id, e.box.x, e.box.y, e.box.w, e.box.h, e.score,
                      NO_DEPTH if e.depth is None else e.depth)
            for f, es in out.items() for e in es]
    write_mot(rows, wd / args.out)
    return EXIT_OK


def _frames(recs: Sequence[MotRecord]):
    return to_frames(LabeledBox(r.frame, r.id, BBox(r.x, r.y, r.w, r.h)) for r in recs)


def _seq_name(p: Path) -> str:
    return p.parent.name or p.stem


def cmd_eval(args, wd: Path) -> int:
    if len(args.gt) != len(args.pred):
        raise DataError(f"{len(args.gt)} gt files but {len(args.pred)} prediction files")
    names = [_seq_name(Path(g)) for g in args.gt]
    if len(set(names)) != len(names):
        names = [str(Path(g).with_suffix("")) for g in args.gt]
    counts = []
    lines = [REPORT_HEADER]
    for name, g, p in zip(names, args.gt, args.pred):
        c = sequence_counts(_frames(read_mot(wd / g)), _frames(read_mot(wd / p)))
        counts.append(c)
        lines.append(c.report().row(name))
    lines.append(pool(counts).report().row("ALL"))
    text = "\n".join(lines) + "\n"
    _write_text(wd / args.out, text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_sweep(args, wd: Path) -> int:
    cfg = _load_config(wd / args.config if args.config else None)
    if args.kind == "gamma":
        text = format_gamma_sweep(gamma_sweep(cfg))
    else:
        text = format_window_sweep(window_sweep(cfg))
    _write_text(wd / args.out, text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_inspect_head(args, wd: Path) -> int:
    try:
        cfg = dh.DepthHeadConfig(queries=args.queries, heads=args.heads, points=args.points, scales=args.scales,
                                 channels=args.channels, layers=args.layers, beta=args.beta)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    inputs = dh.make_inputs(cfg, args.seed)
    weights = dh.HeadWeights.zeros(cfg) if args.zero_weights else None
    result = dh.forward(cfg, inputs, args.seed, weights)
    _write_text(wd / args.out, dh.format_trace(cfg, result, args.seed))
    print(f"queries={cfg.queries} layers={cfg.layers} P_mean={float(np.mean(result.p)):.6f}")
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="deptrack", description=__doc__.splitlines()[0])
    p.add_argument("--workdir", type=Path, default=Path("."), help="root for every relative path")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="write gt.txt / det.txt for every suite scene")
    s.add_argument("--config", type=Path)
    s.add_argument("--out-dir", default="sim")
    s.add_argument("--seed", type=int, help="first seed (overrides scene.seed)")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("label", help="soft depth labels for a gt file")
    s.add_argument("--depth-source", choices=["synthetic"], default="synthetic")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--scene", required=True, help="scene.cfg written by simulate")
    s.add_argument("--window", type=int)
    s.add_argument("--stride", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_label)

    s = sub.add_parser("track", help="run a tracker over a detection file")
    s.add_argument("--tracker", choices=["sort", "byte"], default="byte")
    s.add_argument("--det", required=True)
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_track)

    s = sub.add_parser("eval", help="HOTA / IDF1 / CLEAR report per sequence plus a pooled ALL row")
    s.add_argument("--gt", nargs="+", required=True)
    s.add_argument("--pred", nargs="+", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep", help="gamma or window/stride ablation over the benchmark suite")
    s.add_argument("--kind", choices=["gamma", "window"], required=True)
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("inspect-head", help="per-layer trace of the depth decoder forward pass")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--queries", type=int, default=300)
    s.add_argument("--layers", type=int, default=6)
    s.add_argument("--heads", type=int, default=8)
    s.add_argument("--points", type=int, default=4)
    s.add_argument("--scales", type=int, default=3)
    s.add_argument("--channels", type=int, default=256)
    s.add_argument("--beta", type=float, default=1.0)
    s.add_argument("--zero-weights", action="store_true", help="all decoder weights zero")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_inspect_head)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    wd = args.workdir
    if getattr(args, "config", None) is not None and args.command == "simulate":
        args.config = wd / args.config
    try:
        return args.func(args, wd)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO
    except ValueError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
