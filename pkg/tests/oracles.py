"""Reference implementations used only by the tests.

Each oracle takes a different route from the code it checks: pixel counting
instead of interval arithmetic, rank-by-rank precision instead of the
envelope sweep, Lagrange interpolation plus trapezoid sums instead of least
squares plus closed-form integration.
"""

from __future__ import annotations

import numpy as np


def rect_pixels(x: int, y: int, w: int, h: int, width: int, height: int) -> np.ndarray:
    canvas = np.zeros((height, width), dtype=bool)
    canvas[y:y + h, x:x + w] = True
    return canvas


def pixel_overlap(a: tuple[int, int, int, int], b: tuple[int, int, int, int]) -> int:
    """Count integer pixel cells inside both rectangles (x, y, w, h)."""
    right = max(a[0] + a[2], b[0] + b[2], 1)
    bottom = max(a[1] + a[3], b[1] + b[3], 1)
    left = min(a[0], b[0], 0)
    top = min(a[1], b[1], 0)
    shift = lambda r: (r[0] - left, r[1] - top, r[2], r[3])  # noqa: E731
    w, h = right - left, bottom - top
    return int(np.count_nonzero(rect_pixels(*shift(a), w, h) & rect_pixels(*shift(b), w, h)))


def lattice_bits(x: int, y: int, w: int, h: int, size: int = 8) -> int:
    """Pixel set of a rectangle on a ``size`` x ``size`` lattice as an int bitmask."""
    bits = 0
    for yy in range(y, y + h):
        for xx in range(x, x + w):
            bits |= 1 << (yy * size + xx)
    return bits


def brute_force_saliency(
    width: int, height: int, ctu: int, dets: list[tuple[int, int, int, int]], theta: float
) -> list[bool]:
    """Per-pixel evaluation of the decision rule for integer boxes inside the image."""
    cols, rows = -(-width // ctu), -(-height // ctu)
    pad_h, pad_w = rows * ctu, cols * ctu
    # pixel counts of every CTU, from an all-ones image padded with zeros
    ones = np.zeros((pad_h, pad_w), dtype=np.int64)
    ones[:height, :width] = 1
    ctu_pixels = ones.reshape(rows, ctu, cols, ctu).sum(axis=(1, 3)).ravel()
    best = [0.0] * (cols * rows)
    for x, y, w, h in dets:
        canvas = np.zeros((pad_h, pad_w), dtype=np.int64)
        canvas[:height, :width] = rect_pixels(x, y, w, h, width, height)
        inside = canvas.reshape(rows, ctu, cols, ctu).sum(axis=(1, 3)).ravel()
        det_pixels = w * h
        for k in range(cols * rows):
            d = int(inside[k]) / min(int(ctu_pixels[k]), det_pixels)
            best[k] = max(best[k], d)
    return [d > theta for d in best]


def pr_oracle_ap(hits: list[bool], n_gt: int) -> float:
    """AP from interpolated precision at each recall level k/n_gt.

    Interpolated precision at recall r is the best precision at any rank whose
    recall is at least r.
    """
    ranks = []
    tp = 0
    for i, hit in enumerate(hits, 1):
        tp += hit
        ranks.append((tp / n_gt, tp / i))
    total = 0.0
    for k in range(1, n_gt + 1):
        level = k / n_gt
        candidates = [p for r, p in ranks if r >= level - 1e-12]
        total += max(candidates) if candidates else 0.0
    return total / n_gt


def greedy_hits(ious: list[list[float]], scores: list[float], threshold: float) -> list[bool]:
    """Hit list for one image, predictions visited by descending score (stable)."""
    order = sorted(range(len(scores)), key=lambda i: -scores[i])
    used: set[int] = set()
    hits = []
    for i in order:
        row = ious[i]
        free = [(row[g], -g) for g in range(len(row)) if g not in used]
        if free:
            best_iou, neg_g = max(free)
            if best_iou >= threshold:
                used.add(-neg_g)
                hits.append(True)
                continue
        hits.append(False)
    return hits


def lagrange_eval(xs: np.ndarray, ys: np.ndarray, t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(t, dtype=np.float64)
    for j in range(len(xs)):
        basis = np.ones_like(t, dtype=np.float64)
        for m in range(len(xs)):
            if m != j:
                basis *= (t - xs[m]) / (xs[j] - xs[m])
        out += ys[j] * basis
    return out


def trapezoid_bd_rate(
    test_rates, test_q, anchor_rates, anchor_q, subintervals: int = 10_000
) -> float:
    """BD-rate by interpolating log10(rate) exactly and summing trapezoids."""
    test_q, anchor_q = np.asarray(test_q, float), np.asarray(anchor_q, float)
    lo = max(test_q.min(), anchor_q.min())
    hi = min(test_q.max(), anchor_q.max())
    t = np.linspace(lo, hi, subintervals + 1)
    diff = lagrange_eval(test_q, np.log10(test_rates), t) - lagrange_eval(anchor_q, np.log10(anchor_rates), t)
    step = (hi - lo) / subintervals
    integral = step * (diff[0] / 2 + diff[1:-1].sum() + diff[-1] / 2)
    return (10 ** (integral / (hi - lo)) - 1) * 100
