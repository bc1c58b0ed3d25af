import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from deptrack.assignment import depth_distance, fuse_cost, gate, hungarian, iou_cost
from deptrack.geometry import BBox, iou
from oracles import brute_force_assignment


def test_diagonal_zero():
    c = np.ones((3, 3)) - np.eye(3)
    a = hungarian(c)
    assert a.pairs == [(0, 0), (1, 1), (2, 2)]
    assert a.total(c) == 0


def test_two_by_two():
    c = [[4, 1], [2, 3]]
    a = hungarian(c)
    assert a.pairs == [(0, 1), (1, 0)]
    assert a.total(c) == 3 == brute_force_assignment(c)


def test_ties_prefer_lowest_indices():
    assert hungarian(np.zeros((3, 3))).pairs == [(0, 0), (1, 1), (2, 2)]
    assert hungarian(np.zeros((2, 4))).pairs == [(0, 0), (1, 1)]
    assert hungarian(np.zeros((4, 2))).pairs == [(0, 0), (1, 1)]


@pytest.mark.parametrize("seed", range(100))
def test_random_5x7_matches_brute_force(seed):
    c = np.random.default_rng(seed).uniform(0, 10, (5, 7))
    a = hungarian(c)
    assert len(a.pairs) == 5
    assert a.total(c) == pytest.approx(brute_force_assignment(c), abs=1e-12)


@pytest.mark.parametrize("shape", [(0, 3), (3, 0), (0, 0)])
def test_empty(shape):
    a = hungarian(np.zeros(shape))
    assert a.pairs == []
    assert a.unmatched_rows == list(range(shape[0]))
    assert a.unmatched_cols == list(range(shape[1]))


def test_rejects_non_finite():
    with pytest.raises(ValueError):
        hungarian([[0.0, np.inf]])
    with pytest.raises(ValueError):
        hungarian([[np.nan]])


@given(arrays(float, st.tuples(st.integers(1, 5), st.integers(1, 5)),
              elements=st.integers(-20, 20).map(float)))
def test_integer_matrices_against_oracle(c):
    a = hungarian(c)
    assert len(a.pairs) == min(c.shape)
    rows = [r for r, _ in a.pairs]
    cols = [k for _, k in a.pairs]
    assert len(set(rows)) == len(rows) and len(set(cols)) == len(cols)
    assert a.total(c) == brute_force_assignment(c)


@pytest.mark.parametrize("seed", range(20))
def test_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    c = rng.uniform(0, 1, (4, 6))
    pr, pc = rng.permutation(4), rng.permutation(6)
    assert hungarian(c[pr][:, pc]).total(c[pr][:, pc]) == pytest.approx(hungarian(c).total(c), abs=1e-12)


@pytest.mark.parametrize("seed", range(100))
def test_row_constant_shift_keeps_matching(seed):
    rng = np.random.default_rng(1000 + seed)
    c = rng.integers(0, 50, (4, 4)).astype(float) + rng.uniform(0, 1e-3, (4, 4))
    shifted = c.copy()
    row = seed % 4
    shifted[row] += rng.uniform(-5, 5)
    assert hungarian(c).pairs == hungarian(shifted).pairs


def test_iou_cost_values():
    b = BBox(0, 0, 2, 2)
    assert iou_cost([b], [b])[0, 0] == 0.0
    assert iou_cost([b], [BBox(10, 10, 2, 2)])[0, 0] == 1.0
    tracks = [BBox(0, 0, 4, 4), BBox(2, 2, 3, 3)]
    dets = [BBox(1, 1, 4, 4), BBox(0, 0, 1, 5)]
    c = iou_cost(tracks, dets)
    for i, t in enumerate(tracks):
        for j, d in enumerate(dets):
            assert c[i, j] == pytest.approx(1 - iou(t, d), abs=1e-15)


def test_depth_distance_values():
    assert depth_distance([0.4], [0.4])[0, 0] == 0.0
    assert depth_distance([0.2], [0.7], eta=1.0)[0, 0] == pytest.approx(0.5)
    # 2 * 0.8 = 1.6 before clamping
    assert depth_distance([0.1], [0.9], eta=2.0)[0, 0] == 1.0
    assert depth_distance([0.1], [0.5], eta=2.0)[0, 0] == pytest.approx(0.8)


def test_depth_distance_unknown_depth_is_neutral():
    assert depth_distance([np.nan, 0.3], [0.9]).ravel().tolist() == pytest.approx([0.0, 0.6])


@given(st.lists(st.floats(0, 1), min_size=1, max_size=6), st.lists(st.floats(0, 1), min_size=1, max_size=6),
       st.floats(0.1, 5))
def test_depth_distance_transpose_symmetry(t, d, eta):
    a = depth_distance(t, d, eta)
    assert np.array_equal(a, depth_distance(d, t, eta).T)
    assert ((a >= 0) & (a <= 1)).all()


def test_fuse_cost_values():
    c = np.full((2, 2), 0.5)
    d = np.full((2, 2), 0.25)
    assert np.array_equal(fuse_cost(c, d, 0.7, 0.0), 0.7 * c)
    assert fuse_cost(c, d, 0.8, 0.2)[0, 0] == pytest.approx(0.45, abs=1e-15)
    assert np.array_equal(fuse_cost(c, d, 0.0, 1.0), d)
    with pytest.raises(ValueError):
        fuse_cost(c, np.zeros((2, 3)), 1, 1)


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0.01, 1), st.floats(0, 1))
def test_fuse_cost_monotone_in_depth(c, d, bump, gamma, lam):
    lo = fuse_cost([[c]], [[d]], lam, gamma)[0, 0]
    hi = fuse_cost([[c]], [[min(1.0, d + bump)]], lam, gamma)[0, 0]
    assert hi >= lo


def test_gate():
    c = np.array([[0.2, 0.9], [0.9, 0.5]])
    a = hungarian(c)
    assert gate(a, c, np.inf).pairs == a.pairs
    g = gate(a, c, -1)
    assert g.pairs == [] and g.unmatched_rows == [0, 1] and g.unmatched_cols == [0, 1]
    g = gate(a, c, 0.5)
    assert g.pairs == [(0, 0), (1, 1)]
    g = gate(a, c, 0.4999)
    assert g.pairs == [(0, 0)] and g.unmatched_rows == [1] and g.unmatched_cols == [1]
