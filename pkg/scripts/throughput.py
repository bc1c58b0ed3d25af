"""Frames per second of both trackers on a ten-target synthetic sequence."""
import argparse
import time

from deptrack.sim import SceneSpec, TargetSpec, simulate
from deptrack.tracker import Tracker, TrackerConfig


def ten_target_scene(frames: int, seed: int = 0) -> SceneSpec:
    # a 5x2 grid of swaying targets keeps all ten in view for the whole run
    targets = tuple(TargetSpec(x=70.0 + 120 * (k % 5), y=110.0 + 150 * (k // 5), z=0.4 + 0.04 * k,
                               sway_amp=25.0, sway_period=50.0 + 5 * k) for k in range(10))
    return SceneSpec(seed=seed, frames=frames, targets=targets)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--frames", type=int, default=2000)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    sc = ten_target_scene(args.frames)
    _, dets = simulate(sc)
    per_frame = sum(map(len, dets.values())) / sc.frames
    print(f"{sc.frames} frames, {per_frame:.1f} detections per frame")
    for kind in ("sort", "byte"):
        best = min(_timed(kind, dets, sc.frames) for _ in range(args.repeats))
        print(f"{kind}: {sc.frames / best:.0f} frames/s")


def _timed(kind, dets, frames):
    t0 = time.perf_counter()
    Tracker(TrackerConfig(), kind).run(dets, frames)
    return time.perf_counter() - t0


if __name__ == "__main__":
    main()
