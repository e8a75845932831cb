from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_force_saliency, pixel_overlap
from vcmqp.errors import DegenerateDetectionError, DimensionError, RangeError
from vcmqp.geometry import (
    CtuGrid,
    Rect,
    SaliencyMask,
    ctu_rect,
    decide_saliency,
    overlap_area,
    relative_overlap,
)


def test_grid_counts_round_up():
    grid = CtuGrid(2048, 1024)
    assert (grid.cols, grid.rows, len(grid)) == (16, 8, 128)
    assert (CtuGrid(200, 100).cols, CtuGrid(200, 100).rows) == (2, 1)
    assert len(CtuGrid(1, 1, 128)) == 1


@pytest.mark.parametrize("bad", [0, -4, 1.5, True])
def test_grid_rejects_bad_sizes(bad):
    with pytest.raises(DimensionError):
        CtuGrid(bad, 10)


def test_ctu_rect_examples():
    grid = CtuGrid(2048, 1024, 128)
    assert ctu_rect(grid, 0) == Rect(0, 0, 128, 128)
    assert ctu_rect(grid, 16) == Rect(0, 128, 128, 128)
    assert ctu_rect(CtuGrid(200, 100, 128), 1) == Rect(128, 0, 72, 100)


def test_ctu_rect_matches_pixel_membership():
    # every pixel belongs to the CTU (row-major) whose clipped rectangle holds it
    for w, h, c in [(200, 100, 128), (130, 70, 32), (64, 64, 64), (1, 300, 128)]:
        grid = CtuGrid(w, h, c)
        ys, xs = np.mgrid[0:h, 0:w]
        owner = (ys // c) * grid.cols + xs // c
        for k in range(len(grid)):
            sel = np.argwhere(owner == k)
            r = ctu_rect(grid, k)
            assert (r.x, r.y) == (sel[:, 1].min(), sel[:, 0].min())
            assert (r.w, r.h) == (np.ptp(sel[:, 1]) + 1, np.ptp(sel[:, 0]) + 1)
            assert r.area == len(sel) > 0


def test_ctu_rect_out_of_range():
    grid = CtuGrid(256, 256, 128)
    with pytest.raises(IndexError):
        ctu_rect(grid, 4)
    with pytest.raises(IndexError):
        ctu_rect(grid, -1)


def test_overlap_examples():
    a = Rect(0, 0, 128, 128)
    assert overlap_area(a, Rect(64, 64, 128, 128)) == 4096
    assert overlap_area(a, Rect(128, 0, 128, 128)) == 0
    assert overlap_area(a, a) == a.area


def test_overlap_exhaustive_small_lattice():
    spans = [(p, s) for p in range(5) for s in range(0, 5 - p)]
    rects = [(x, y, w, h) for (x, w), (y, h) in itertools.product(spans, spans)]
    for a, b in itertools.product(rects[::3], rects):
        assert overlap_area(Rect(*a), Rect(*b)) == pixel_overlap(a, b)


@settings(max_examples=300, deadline=None)
@given(
    st.tuples(st.integers(-40, 200), st.integers(-40, 200), st.integers(0, 150), st.integers(0, 150)),
    st.tuples(st.integers(-40, 200), st.integers(-40, 200), st.integers(0, 150), st.integers(0, 150)),
)
def test_overlap_matches_pixel_count_random(a, b):
    assert overlap_area(Rect(*a), Rect(*b)) == pixel_overlap(a, b)


def test_relative_overlap_examples():
    ctu = Rect(0, 0, 128, 128)
    assert relative_overlap(ctu, Rect(10, 10, 5, 7)) == 1.0
    assert relative_overlap(ctu, Rect(300, 0, 5, 5)) == 0.0
    assert relative_overlap(ctu, Rect(64, 64, 128, 128)) == 0.25
    # CTU fully covered by a large box
    assert relative_overlap(ctu, Rect(-10, -10, 500, 500)) == 1.0


def test_relative_overlap_float_containment_is_exact():
    ctu = Rect(128, 256, 128, 128)
    det = Rect(130.1, 260.7, 3.3, 0.9)
    assert relative_overlap(ctu, det) == 1.0


def test_relative_overlap_rejects_zero_area_detection():
    with pytest.raises(DegenerateDetectionError):
        relative_overlap(Rect(0, 0, 128, 128), Rect(5, 5, 0, 10))


def test_negative_size_rect_rejected():
    with pytest.raises(ValueError):
        Rect(0, 0, -1, 5)


def test_decide_examples():
    grid = CtuGrid(512, 256, 128)
    full = decide_saliency(grid, [Rect(0, 0, 512, 256)], 0.0)
    assert all(full.flags)
    empty = decide_saliency(grid, [], 0.0)
    assert not any(empty.flags) and len(empty.flags) == len(grid)

    small = decide_saliency(CtuGrid(256, 256, 128), [Rect(0, 0, 12, 12)], 0.1)
    assert small.flags == (True, False, False, False)


def test_decide_edge_touching_box_is_not_salient():
    grid = CtuGrid(256, 128, 128)
    mask = decide_saliency(grid, [Rect(0, 0, 128, 128)], 0.0)
    assert mask.flags == (True, False)


def test_decide_strict_threshold():
    # d = 0.25 exactly for CTU 0; theta = 0.25 must not mark it
    grid = CtuGrid(256, 256, 128)
    det = [Rect(64, 64, 128, 128)]
    assert decide_saliency(grid, det, 0.25).flags == (False, False, False, False)
    assert decide_saliency(grid, det, 0.2499).flags == (True, True, True, True)


def test_decide_uses_clipped_border_area():
    # border CTU is 72x100; a 72x100 box filling it has d = 1 against the clipped area
    grid = CtuGrid(200, 100, 128)
    mask = decide_saliency(grid, [Rect(128, 0, 72, 50)], 0.99)
    assert mask.flags == (False, True)


@pytest.mark.parametrize("theta", [-0.1, 1.0, 1.5])
def test_decide_rejects_theta(theta):
    with pytest.raises(RangeError):
        decide_saliency(CtuGrid(10, 10), [], theta)


def test_decide_rejects_degenerate_detection():
    with pytest.raises(DegenerateDetectionError):
        decide_saliency(CtuGrid(256, 256), [Rect(3, 3, 0, 0)], 0.0)


boxes = st.lists(
    st.tuples(st.integers(0, 250), st.integers(0, 250), st.integers(1, 120), st.integers(1, 120)),
    max_size=6,
)


@settings(max_examples=150, deadline=None)
@given(boxes, st.sampled_from([32, 64, 128]), st.floats(0, 0.99))
def test_decide_matches_brute_force(dets, ctu, theta):
    width, height = 256, 200
    dets = [(x, y, min(w, width - x), min(h, height - y)) for x, y, w, h in dets if x < width and y < height]
    mask = decide_saliency(CtuGrid(width, height, ctu), [Rect(*d) for d in dets], theta)
    assert list(mask.flags) == brute_force_saliency(width, height, ctu, dets, theta)


@settings(max_examples=100, deadline=None)
@given(boxes, st.floats(0, 0.99), st.floats(0, 0.99))
def test_decide_monotone_in_theta(dets, t1, t2):
    lo, hi = sorted((t1, t2))
    grid = CtuGrid(300, 260, 64)
    rects = [Rect(*d) for d in dets]
    low = decide_saliency(grid, rects, lo).flags
    high = decide_saliency(grid, rects, hi).flags
    assert all(a or not b for a, b in zip(low, high))


@settings(max_examples=100, deadline=None)
@given(boxes, boxes, st.floats(0, 0.99))
def test_decide_monotone_in_detections(dets, extra, theta):
    grid = CtuGrid(300, 260, 64)
    before = decide_saliency(grid, [Rect(*d) for d in dets], theta).flags
    after = decide_saliency(grid, [Rect(*d) for d in dets + extra], theta).flags
    assert all(b or not a for a, b in zip(before, after))


@settings(max_examples=100, deadline=None)
@given(boxes)
def test_theta_zero_means_positive_overlap(dets):
    grid = CtuGrid(300, 260, 64)
    rects = [Rect(*d) for d in dets]
    mask = decide_saliency(grid, rects, 0.0)
    for k, flag in enumerate(mask.flags):
        assert flag == any(overlap_area(ctu_rect(grid, k), r) > 0 for r in rects)


def test_mask_dict_round_trip():
    grid = CtuGrid(300, 200, 128)
    mask = decide_saliency(grid, [Rect(0, 0, 30, 30)], 0.0)
    assert SaliencyMask.from_dict(mask.to_dict("a")) == mask
    with pytest.raises(DimensionError):
        SaliencyMask(grid, (True,))
