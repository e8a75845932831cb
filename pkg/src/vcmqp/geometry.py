"""CTU tiling, rectangle overlap and the per-CTU saliency decision.

Rectangles are ``(x, y, w, h)`` in pixels with real-valued coordinates.
Areas and intersections are always computed from edges
(``(right - left) * (bottom - top)``) so that a rectangle contained in another
yields an intersection bit-identical to its own area, and the relative
overlap of a contained box is exactly ``1.0`` even for float inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateDetectionError, DimensionError, RangeError

DEFAULT_CTU_SIZE = 128


@dataclass(frozen=True)
class Rect:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        for name in ("x", "y", "w", "h"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"Rect.{name} must be finite, got {value!r}")
        if self.w < 0 or self.h < 0:
            raise ValueError(f"Rect width/height must be non-negative, got {self.w}x{self.h}")

    @property
    def right(self) -> float:
        return self.x + self.w

    @property
    def bottom(self) -> float:
        return self.y + self.h

    @property
    def area(self) -> float:
        return (self.right - self.x) * (self.bottom - self.y)

    def contains(self, other: Rect) -> bool:
        return (
            self.x <= other.x
            and self.y <= other.y
            and other.right <= self.right
            and other.bottom <= self.bottom
        )

    def clip(self, width: float, height: float) -> Rect:
        """Intersect with the image rectangle ``[0, width] x [0, height]``.

        A rectangle lying fully outside collapses to zero area.
        """
        x0 = min(max(self.x, 0), width)
        y0 = min(max(self.y, 0), height)
        x1 = min(max(self.right, 0), width)
        y1 = min(max(self.bottom, 0), height)
        return Rect(x0, y0, x1 - x0, y1 - y0)

    def as_list(self) -> list[float]:
        return [self.x, self.y, self.w, self.h]


@dataclass(frozen=True)
class CtuGrid:
    image_width: int
    image_height: int
    ctu_size: int = DEFAULT_CTU_SIZE

    def __post_init__(self) -> None:
        for name in ("image_width", "image_height", "ctu_size"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value <= 0:
                raise DimensionError(f"CtuGrid.{name} must be a positive integer, got {value!r}")

    @property
    def cols(self) -> int:
        return -(-self.image_width // self.ctu_size)

    @property
    def rows(self) -> int:
        return -(-self.image_height // self.ctu_size)

    def __len__(self) -> int:
        return self.cols * self.rows

    def edges(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Row-major ``(x0, y0, x1, y1)`` arrays of all clipped CTU rectangles."""
        xs = np.arange(self.cols, dtype=np.float64) * self.ctu_size
        ys = np.arange(self.rows, dtype=np.float64) * self.ctu_size
        x0, y0 = np.meshgrid(xs, ys)
        x1 = np.minimum(x0 + self.ctu_size, self.image_width)
        y1 = np.minimum(y0 + self.ctu_size, self.image_height)
        return x0.ravel(), y0.ravel(), x1.ravel(), y1.ravel()

    def rects(self) -> list[Rect]:
        return [ctu_rect(self, k) for k in range(len(self))]


@dataclass(frozen=True)
class SaliencyMask:
    grid: CtuGrid
    flags: tuple[bool, ...]

    def __post_init__(self) -> None:
        if len(self.flags) != len(self.grid):
            raise DimensionError(
                f"mask has {len(self.flags)} flags but the grid has "
                f"{self.grid.cols}x{self.grid.rows} CTUs"
            )

    @classmethod
    def uniform(cls, grid: CtuGrid, salient: bool) -> SaliencyMask:
        return cls(grid, (salient,) * len(grid))

    @property
    def salient_count(self) -> int:
        return sum(self.flags)

    def as_array(self) -> np.ndarray:
        return np.array(self.flags, dtype=bool).reshape(self.grid.rows, self.grid.cols)

    def to_dict(self, image_id: str = "") -> dict:
        return {
            "schema": "vcm-mask/1",
            "image_id": image_id,
            "width": self.grid.image_width,
            "height": self.grid.image_height,
            "ctu_size": self.grid.ctu_size,
            "cols": self.grid.cols,
            "rows": self.grid.rows,
            "flags": [int(f) for f in self.flags],
        }

    @classmethod
    def from_dict(cls, data: dict) -> SaliencyMask:
        grid = CtuGrid(int(data["width"]), int(data["height"]), int(data["ctu_size"]))
        if (data.get("cols", grid.cols), data.get("rows", grid.rows)) != (grid.cols, grid.rows):
            raise DimensionError("mask cols/rows disagree with width/height/ctu_size")
        return cls(grid, tuple(bool(f) for f in data["flags"]))


def ctu_rect(grid: CtuGrid, k: int) -> Rect:
    """Return the ``k``-th CTU in row-major order, clipped to the image."""
    if not 0 <= k < len(grid):
        raise IndexError(f"CTU index {k} out of range for a grid of {len(grid)} CTUs")
    row, col = divmod(k, grid.cols)
    x = col * grid.ctu_size
    y = row * grid.ctu_size
    return Rect(
        x,
        y,
        min(grid.ctu_size, grid.image_width - x),
        min(grid.ctu_size, grid.image_height - y),
    )


def overlap_area(a: Rect, b: Rect) -> float:
    iw = max(0, min(a.right, b.right) - max(a.x, b.x))
    ih = max(0, min(a.bottom, b.bottom) - max(a.y, b.y))
    return iw * ih


def relative_overlap(ctu: Rect, det: Rect) -> float:
    """Intersection area normalized by the smaller of the two areas.

    The result is 1 when either rectangle contains the other and 0 when they
    share no area.
    """
    det_area = det.area
    if det_area <= 0:
        raise DegenerateDetectionError(f"detection {det} has zero area")
    ctu_area = ctu.area
    if ctu_area <= 0:
        raise DimensionError(f"CTU {ctu} has zero area")
    return overlap_area(ctu, det) / min(ctu_area, det_area)


def _det_edges(dets: Sequence[Rect]) -> tuple[np.ndarray, ...]:
    arr = np.array([[d.x, d.y, d.right, d.bottom] for d in dets], dtype=np.float64)
    return arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3]


def relative_overlap_matrix(grid: CtuGrid, dets: Sequence[Rect]) -> np.ndarray:
    """Relative overlap of every (CTU, detection) pair, shape ``(len(grid), len(dets))``."""
    for det in dets:
        if det.area <= 0:
            raise DegenerateDetectionError(f"detection {det} has zero area")
    if not dets:
        return np.zeros((len(grid), 0))
    cx0, cy0, cx1, cy1 = (e[:, None] for e in grid.edges())
    dx0, dy0, dx1, dy1 = (e[None, :] for e in _det_edges(dets))
    iw = np.maximum(0.0, np.minimum(cx1, dx1) - np.maximum(cx0, dx0))
    ih = np.maximum(0.0, np.minimum(cy1, dy1) - np.maximum(cy0, dy0))
    ctu_area = (cx1 - cx0) * (cy1 - cy0)
    det_area = (dx1 - dx0) * (dy1 - dy0)
    return (iw * ih) / np.minimum(ctu_area, det_area)


def decide_saliency(grid: CtuGrid, dets: Iterable[Rect], theta: float) -> SaliencyMask:
    """Mark CTU ``k`` salient iff some detection's relative overlap with it exceeds ``theta``.

    The comparison is strict, so with ``theta = 0`` a detection that merely
    touches a CTU edge does not make it salient.
    """
    if not 0 <= theta < 1:
        raise RangeError(f"theta must lie in [0, 1), got {theta!r}")
    dets = list(dets)
    if not dets:
        return SaliencyMask.uniform(grid, False)
    best = relative_overlap_matrix(grid, dets).max(axis=1)
    return SaliencyMask(grid, tuple(bool(v) for v in best > theta))
