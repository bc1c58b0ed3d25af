import random

import pytest
from hypothesis import given, settings, strategies as st

from deptrack.config import ConfigError, RunConfig, format_config, parse_config, read_config
from deptrack.io import (
    NO_DEPTH, FormatError, LabelRecord, MotRecord, format_record, parse_line, read_labels, read_mot,
    write_labels, write_mot,
)


def test_parse_examples():
    r, extra = parse_line("1,3,10.0,20.0,5.0,8.0,0.90,0.35")
    assert (r.frame, r.id, r.x, r.y, r.w, r.h, r.conf, r.depth) == (1, 3, 10.0, 20.0, 5.0, 8.0, 0.9, 0.35)
    assert extra == []
    legacy, _ = parse_line("1,3,10,20,5,8,0.9,-1,-1,-1")
    assert legacy.depth == NO_DEPTH and not legacy.has_depth


def test_absent_depth_written_bare():
    line = format_record(MotRecord(2, -1, 1, 2, 3, 4, 0.5, NO_DEPTH))
    assert line == "2,-1,1.000000,2.000000,3.000000,4.000000,0.500000,-1"


@pytest.mark.parametrize("line", ["1,2,3", "0,1,1,1,1,1,1,0.5", "1,x,1,1,1,1,1,0.5", "1,1,1,1,1,1,1,1.5",
                                  "1.5,1,1,1,1,1,1,0.5", "1,1,nan,1,1,1,1,0.5"])
def test_bad_lines_rejected(line):
    with pytest.raises(FormatError):
        parse_line(line)


def test_error_names_line_number(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("1,1,1,1,1,1,1,0.5\n\n2,1,1,1\n")
    with pytest.raises(FormatError) as e:
        read_mot(p)
    assert e.value.lineno == 3 and ":3:" in str(e.value)


def test_empty_list_empty_file(tmp_path):
    p = tmp_path / "e.txt"
    write_mot([], p)
    assert p.read_bytes() == b"" and read_mot(p) == []


def test_sorted_on_read_and_write(tmp_path):
    recs = [MotRecord(3, 1, 0, 0, 1, 1, 1, 0.5), MotRecord(1, 2, 0, 0, 1, 1, 1, 0.5), MotRecord(1, 1, 0, 0, 1, 1, 1, -1)]
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    write_mot(recs, a)
    write_mot(list(reversed(recs)), b)
    assert a.read_bytes() == b.read_bytes()
    assert [(r.frame, r.id) for r in read_mot(a)] == [(1, 1), (1, 2), (3, 1)]
    c = tmp_path / "c.txt"
    c.write_text("3,1,0,0,1,1,1,0.5\n1,1,0,0,1,1,1,-1\n")
    assert [r.frame for r in read_mot(c)] == [1, 3]


def _canonical(rng):
    q = lambda lo, hi: round(rng.uniform(lo, hi), 6)
    depth = NO_DEPTH if rng.random() < 0.2 else q(0, 1)
    return MotRecord(rng.randint(1, 50), rng.randint(-1, 20), q(-50, 600), q(-50, 400), q(1, 200), q(1, 300),
                     q(0, 1), depth)


def test_round_trip_on_100_random_record_sets(tmp_path):
    rng = random.Random(100)
    for k in range(100):
        recs = [_canonical(rng) for _ in range(rng.randint(0, 30))]
        p, q = tmp_path / f"{k}.txt", tmp_path / f"{k}b.txt"
        write_mot(recs, p)
        back = read_mot(p)
        assert back == sorted(recs, key=MotRecord.sort_key)
        write_mot(back, q)
        assert p.read_bytes() == q.read_bytes()


def test_legacy_lines_canonicalised(tmp_path):
    src = tmp_path / "legacy.txt"
    src.write_text("2,4,10,20,5,8,0.9,-1,-1,-1\n1,4,10.5,20.25,5,8,1,-1,-1,-1\n")
    out = tmp_path / "out.txt"
    write_mot(read_mot(src), out)
    assert out.read_text() == ("1,4,10.500000,20.250000,5.000000,8.000000,1.000000,-1\n"
                               "2,4,10.000000,20.000000,5.000000,8.000000,0.900000,-1\n")
    again = tmp_path / "again.txt"
    write_mot(read_mot(out), again)
    assert again.read_bytes() == out.read_bytes()


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 99), st.integers(-1, 99),
                          st.floats(-1e4, 1e4), st.floats(-1e4, 1e4), st.floats(0.01, 1e4), st.floats(0.01, 1e4),
                          st.floats(0, 1), st.one_of(st.just(-1.0), st.floats(0, 1))), max_size=20))
def test_write_read_write_is_idempotent(tmp_path_factory, rows):
    d = tmp_path_factory.mktemp("rt")
    write_mot([MotRecord(*r) for r in rows], d / "a.txt")
    write_mot(read_mot(d / "a.txt"), d / "b.txt")
    assert (d / "a.txt").read_bytes() == (d / "b.txt").read_bytes()


def test_label_files(tmp_path):
    rows = [LabelRecord(MotRecord(1, 2, 0, 0, 4, 4, 1, 0.25), False), LabelRecord(MotRecord(1, 1, 0, 0, 4, 4, 1, 1.0), True)]
    p = tmp_path / "labels.txt"
    write_labels(rows, p)
    assert p.read_text().splitlines()[0].endswith(",1")
    assert read_labels(p) == sorted(rows, key=lambda r: r.record.sort_key())
    with pytest.raises(FormatError):
        read_mot(p)


# ---------------------------------------------------------------- config

def test_config_examples(tmp_path):
    assert parse_config("tracker.gamma = 0.2").tracker.gamma == 0.2
    p = tmp_path / "empty.cfg"
    p.write_text("")
    assert read_config(p) == RunConfig()
    with pytest.raises(ConfigError, match="tracker.gamma"):
        parse_config("tracker.gamma = abc")


def test_config_rejects_unknown_and_malformed():
    with pytest.raises(ConfigError, match="tracker.gama"):
        parse_config("tracker.gama = 0.2")
    with pytest.raises(ConfigError):
        parse_config("tracker.gamma 0.2")
    with pytest.raises(ConfigError, match="scene.frames"):
        parse_config("scene.frames = 1.5")
    with pytest.raises(ConfigError):
        parse_config("scene.scenarios = CROSSING,BALLET")
    with pytest.raises(ConfigError):
        parse_config("sweep.windows = 2-1")


def test_config_comments_nesting_and_round_trip():
    cfg = parse_config("# header\n\ntracker.kalman.std_pos = 0.1  # tighter\ntracker.depth_enabled = false\n"
                       "scene.merge = off\nsweep.gammas = 0,0.5\n")
    assert cfg.tracker.kalman.std_pos == 0.1 and not cfg.tracker.depth_enabled
    assert cfg.sweep.gamma_list == [0.0, 0.5]
    assert parse_config(format_config(cfg)) == cfg
    assert all(not s.detector.merge_occluded for s in cfg.scene.suite())


def test_config_parse_is_locale_free():
    with pytest.raises(ConfigError):
        parse_config("tracker.gamma = 0,2")
