"""Pixel-accurate instance segmentation AP and its instance-weighted mean.

Matching follows the usual instance-level protocol: predictions of one class
are ranked by score over the whole dataset, each is greedily matched to the
unmatched same-image ground-truth instance of highest mask IoU, and a match
counts when that IoU reaches the threshold.  AP is the exact area under the
precision envelope, averaged over IoU thresholds 0.50, 0.55, ..., 0.95.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import IntegrityError, UndefinedReportError
from .masks import InstanceMask, InstanceSet, iou_matrix, mask_iou

__all__ = [
    "DEFAULT_IOU_THRESHOLDS",
    "ApReport",
    "InstanceMask",
    "InstanceSet",
    "average_precision",
    "class_ap",
    "mask_iou",
    "weighted_ap",
]

DEFAULT_IOU_THRESHOLDS: tuple[float, ...] = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))


def average_precision(tp: Sequence[bool], n_gt: int) -> float:
    """Area under the precision envelope for a ranked list of hits/misses."""
    if n_gt <= 0:
        raise ValueError("average precision needs at least one ground-truth instance")
    if len(tp) == 0:
        return 0.0
    hits = np.cumsum(np.asarray(tp, dtype=np.int64))
    ranks = np.arange(1, len(tp) + 1)
    precision = hits / ranks
    recall = hits / n_gt
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    prev_recall = np.concatenate(([0.0], recall[:-1]))
    return float(np.sum((recall - prev_recall) * envelope))


def _pair_by_image(
    preds: Iterable[InstanceSet], gts: Iterable[InstanceSet]
) -> list[tuple[InstanceSet, InstanceSet]]:
    pred_map = {p.image_id: p for p in preds}
    gt_list = list(gts)
    gt_ids = [g.image_id for g in gt_list]
    if len(set(gt_ids)) != len(gt_ids):
        raise IntegrityError("ground truth lists an image more than once")
    if set(pred_map) != set(gt_ids):
        missing = sorted(set(gt_ids) - set(pred_map))
        extra = sorted(set(pred_map) - set(gt_ids))
        raise IntegrityError(f"prediction/ground-truth image sets differ (missing {missing}, extra {extra})")
    return [(pred_map[g.image_id], g) for g in gt_list]


def _ranked_matches(pairs, class_label: str):
    """Yield per-prediction (image index, IoU row) in rank order, plus the GT count."""
    ranked = []
    n_gt = 0
    for img_idx, (pred_set, gt_set) in enumerate(pairs):
        p_inst = pred_set.of_class(class_label)
        g_inst = gt_set.of_class(class_label)
        n_gt += len(g_inst)
        ious = iou_matrix([p.mask for p in p_inst], [g.mask for g in g_inst])
        for j, p in enumerate(p_inst):
            ranked.append((p.score, img_idx, ious[j]))
    # stable sort keeps file order among equal scores
    ranked.sort(key=lambda item: -item[0])
    return ranked, n_gt


def _hits_at(ranked, n_images: int, threshold: float) -> list[bool]:
    matched: list[set[int]] = [set() for _ in range(n_images)]
    hits = []
    for _, img_idx, ious in ranked:
        best, best_iou = -1, -1.0
        for g, iou in enumerate(ious):
            if g not in matched[img_idx] and iou > best_iou:
                best, best_iou = g, iou
        if best >= 0 and best_iou >= threshold:
            matched[img_idx].add(best)
            hits.append(True)
        else:
            hits.append(False)
    return hits


def class_ap(
    preds: Sequence[InstanceSet],
    gts: Sequence[InstanceSet],
    class_label: str,
    iou_thresholds: Sequence[float] = DEFAULT_IOU_THRESHOLDS,
) -> float | None:
    """AP of one class averaged over ``iou_thresholds``.

    Returns ``None`` when the class has no ground-truth instance, since AP is
    undefined there rather than zero.
    """
    pairs = _pair_by_image(preds, gts)
    ranked, n_gt = _ranked_matches(pairs, class_label)
    if n_gt == 0:
        return None
    aps = [average_precision(_hits_at(ranked, len(pairs), t), n_gt) for t in iou_thresholds]
    return math.fsum(aps) / len(aps)


@dataclass(frozen=True)
class ApReport:
    per_class_ap: Mapping[str, float | None]
    per_class_count: Mapping[str, int]
    weighted_ap: float
    iou_thresholds: tuple[float, ...] = field(default=DEFAULT_IOU_THRESHOLDS)

    def to_dict(self) -> dict:
        return {
            "weighted_ap": self.weighted_ap,
            "iou_thresholds": list(self.iou_thresholds),
            "classes": [
                {"class": c, "ap": self.per_class_ap[c], "count": self.per_class_count[c]}
                for c in self.per_class_ap
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["class", "count", "ap"])
        for c, ap in self.per_class_ap.items():
            writer.writerow([c, self.per_class_count[c], "" if ap is None else repr(ap)])
        writer.writerow(["weighted", sum(self.per_class_count.values()), repr(self.weighted_ap)])
        return buf.getvalue()


def weighted_ap(
    preds: Sequence[InstanceSet],
    gts: Sequence[InstanceSet],
    classes: Iterable[str],
    iou_thresholds: Sequence[float] = DEFAULT_IOU_THRESHOLDS,
) -> ApReport:
    """Per-class AP combined with ground-truth instance counts as weights.

    Classes without ground truth get AP ``None`` and drop out of both the
    numerator and the denominator.
    """
    classes = list(classes)
    per_ap: dict[str, float | None] = {}
    per_count: dict[str, int] = {}
    for c in classes:
        per_ap[c] = class_ap(preds, gts, c, iou_thresholds)
        per_count[c] = sum(len(g.of_class(c)) for g in gts)
    total = sum(per_count.values())
    if total == 0:
        raise UndefinedReportError(f"no ground-truth instances for any of {classes}")
    numer = math.fsum(per_count[c] * per_ap[c] for c in classes if per_count[c] > 0)
    return ApReport(per_ap, per_count, numer / total, tuple(iou_thresholds))
