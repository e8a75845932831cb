"""Uncompressed row-major run-length encoding for binary instance masks.

Runs alternate background/foreground and always start with background, so a
mask whose first pixel is foreground begins with a zero-length run.  The
canonical encoding has no other zero-length runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import DimensionError, FormatError, IntegrityError


def rle_encode(mask: np.ndarray) -> list[int]:
    flat = np.asarray(mask, dtype=bool).ravel()
    if flat.size == 0:
        return []
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], change, [flat.size]))
    runs = np.diff(bounds).tolist()
    if flat[0]:
        runs.insert(0, 0)
    return runs


def rle_decode(runs: Sequence[int], width: int, height: int) -> np.ndarray:
    total = width * height
    runs = [int(r) for r in runs]
    if any(r < 0 for r in runs):
        raise FormatError("RLE contains a negative run length")
    if sum(runs) != total:
        raise FormatError(f"RLE covers {sum(runs)} pixels but the image has {width}x{height} = {total}")
    values = np.arange(len(runs)) % 2 == 1
    return np.repeat(values, runs).reshape(height, width)


@dataclass(frozen=True, eq=False)
class InstanceMask:
    width: int
    height: int
    rle: tuple[int, ...]
    _array: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self._array is None:
            object.__setattr__(self, "_array", rle_decode(self.rle, self.width, self.height))

    @classmethod
    def from_array(cls, mask: np.ndarray) -> InstanceMask:
        mask = np.asarray(mask, dtype=bool)
        height, width = mask.shape
        return cls(width, height, tuple(rle_encode(mask)), mask.copy())

    @property
    def array(self) -> np.ndarray:
        return self._array

    @cached_property
    def pixel_count(self) -> int:
        return int(self._array.sum())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, InstanceMask):
            return NotImplemented
        return (self.width, self.height, self.rle) == (other.width, other.height, other.rle)

    def __hash__(self) -> int:
        return hash((self.width, self.height, self.rle))


def mask_iou(a: InstanceMask, b: InstanceMask) -> float:
    if (a.width, a.height) != (b.width, b.height):
        raise DimensionError(f"mask sizes differ: {a.width}x{a.height} vs {b.width}x{b.height}")
    inter = np.count_nonzero(a.array & b.array)
    union = a.pixel_count + b.pixel_count - inter
    if union == 0:
        return 0.0
    return inter / union


def iou_matrix(preds: Sequence[InstanceMask], gts: Sequence[InstanceMask]) -> np.ndarray:
    """Pairwise mask IoU, shape ``(len(preds), len(gts))``."""
    if not preds or not gts:
        return np.zeros((len(preds), len(gts)))
    shapes = {(m.width, m.height) for m in [*preds, *gts]}
    if len(shapes) != 1:
        raise DimensionError(f"masks of differing sizes in one image: {sorted(shapes)}")
    p = np.stack([m.array.ravel() for m in preds]).astype(np.float64)
    g = np.stack([m.array.ravel() for m in gts]).astype(np.float64)
    inter = p @ g.T
    union = p.sum(1)[:, None] + g.sum(1)[None, :] - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(union > 0, inter / union, 0.0)
    return out


@dataclass(frozen=True)
class Instance:
    id: int
    class_label: str
    score: float
    mask: InstanceMask


@dataclass(frozen=True)
class InstanceSet:
    image_id: str
    width: int
    height: int
    instances: tuple[Instance, ...] = ()

    def __post_init__(self) -> None:
        seen: set[int] = set()
        for inst in self.instances:
            if inst.id in seen:
                raise IntegrityError(f"image {self.image_id!r}: duplicate instance id {inst.id}")
            seen.add(inst.id)
            if (inst.mask.width, inst.mask.height) != (self.width, self.height):
                raise DimensionError(
                    f"image {self.image_id!r}: instance {inst.id} mask is "
                    f"{inst.mask.width}x{inst.mask.height}, image is {self.width}x{self.height}"
                )

    def of_class(self, class_label: str) -> list[Instance]:
        return [i for i in self.instances if i.class_label == class_label]

    def to_dict(self) -> dict:
        return {
            "schema": "vcm-inst/1",
            "image_id": self.image_id,
            "width": self.width,
            "height": self.height,
            "instances": [
                {"id": i.id, "class": i.class_label, "score": i.score, "rle": list(i.mask.rle)}
                for i in self.instances
            ],
        }
