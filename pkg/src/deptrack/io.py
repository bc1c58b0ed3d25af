"""Extended MOTChallenge text format with one depth column.

Canonical line: ``frame,id,x,y,w,h,conf,depth`` with x/y/w/h/conf/depth at six
decimals, except an absent depth, which is written as the bare token ``-1``.
Records are sorted by (frame, id) on write. The 10-field legacy layout
``frame,id,x,y,w,h,conf,-1,-1,-1`` is accepted on read and yields depth -1.

Soft-label files add a ninth column, a 0/1 flag marking rows whose depth came
from the box-average fallback.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Union

PathLike = Union[str, os.PathLike]

NO_DEPTH = -1.0


class FormatError(ValueError):
    """A line in a MOT-style file could not be parsed."""

    def __init__(self, path, lineno: int, msg: str):
        super().__init__(f"{path}:{lineno}: {msg}")
        self.path = path
        self.lineno = lineno


@dataclass(frozen=True)
class MotRecord:
    frame: int
    id: int
    x: float
    y: float
    w: float
    h: float
    conf: float
    depth: float = NO_DEPTH

    @property
    def has_depth(self) -> bool:
        return self.depth != NO_DEPTH

    def sort_key(self):
        return (self.frame, self.id, self.x, self.y, self.w, self.h, self.conf, self.depth)


@dataclass(frozen=True)
class LabelRecord:
    record: MotRecord
    fallback: bool


def _fmt(v: float) -> str:
    return f"{v:.6f}"


def format_record(r: MotRecord) -> str:
    depth = "-1" if r.depth == NO_DEPTH else _fmt(r.depth)
    return ",".join([str(r.frame), str(r.id), _fmt(r.x), _fmt(r.y), _fmt(r.w), _fmt(r.h), _fmt(r.conf), depth])


def _number(tok: str, path, lineno: int, name: str) -> float:
    tok = tok.strip()
    try:
        v = float(tok)
    except ValueError:
        raise FormatError(path, lineno, f"field {name!r} is not a number: {tok!r}") from None
    if not math.isfinite(v):
        raise FormatError(path, lineno, f"field {name!r} is not finite: {tok!r}")
    return v


def _integer(tok: str, path, lineno: int, name: str) -> int:
    v = _number(tok, path, lineno, name)
    if v != int(v):
        raise FormatError(path, lineno, f"field {name!r} must be an integer: {tok.strip()!r}")
    return int(v)


def parse_line(line: str, path="<string>", lineno: int = 1) -> tuple[MotRecord, list[str]]:
    """Parse one line into a record; returns the record and any trailing fields."""
    toks = line.strip().split(",")
    if len(toks) not in (8, 9, 10):
        raise FormatError(path, lineno, f"expected 8 or 10 comma-separated fields, got {len(toks)}")
    frame = _integer(toks[0], path, lineno, "frame")
    if frame < 1:
        raise FormatError(path, lineno, f"frame must be >= 1, got {frame}")
    rid = _integer(toks[1], path, lineno, "id")
    x, y, w, h, conf = (_number(t, path, lineno, n) for t, n in zip(toks[2:7], "x y w h conf".split()))
    if len(toks) == 10:
        depth = NO_DEPTH
    else:
        depth = _number(toks[7], path, lineno, "depth")
        if depth != NO_DEPTH and not 0.0 <= depth <= 1.0:
            raise FormatError(path, lineno, f"depth must be in [0, 1] or -1, got {depth}")
    return MotRecord(frame, rid, x, y, w, h, conf, depth), toks[8:]


def _lines(path: PathLike):
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.strip():
                yield lineno, line


def read_mot(path: PathLike) -> list[MotRecord]:
    out = []
    for lineno, line in _lines(path):
        rec, extra = parse_line(line, path, lineno)
        if len(extra) == 1:
            raise FormatError(path, lineno, "9-field line is a soft-label row; use read_labels")
        out.append(rec)
    out.sort(key=MotRecord.sort_key)
    return out


def write_mot(records: Iterable[MotRecord], path: PathLike) -> None:
    rows = sorted(records, key=MotRecord.sort_key)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for r in rows:
            fh.write(format_record(r) + "\n")


def write_labels(labels: Iterable[LabelRecord], path: PathLike) -> None:
    rows = sorted(labels, key=lambda lab: lab.record.sort_key())
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for lab in rows:
            fh.write(f"{format_record(lab.record)},{int(lab.fallback)}\n")


def read_labels(path: PathLike) -> list[LabelRecord]:
    out = []
    for lineno, line in _lines(path):
        rec, extra = parse_line(line, path, lineno)
        if len(extra) != 1 or extra[0].strip() not in ("0", "1"):
            raise FormatError(path, lineno, "soft-label rows need a trailing 0/1 fallback flag")
        out.append(LabelRecord(rec, extra[0].strip() == "1"))
    out.sort(key=lambda lab: lab.record.sort_key())
    return out
