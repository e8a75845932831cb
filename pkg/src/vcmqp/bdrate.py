"""Bjøntegaard delta rate with an arbitrary quality axis.

Each curve's log10(rate) is fitted as a cubic in quality by least squares
(exact interpolation for four points).  The fit is carried out in a local
variable mapped to [-1, 1] over the curve's own quality range, which keeps the
Vandermonde system well conditioned when qualities are AP values bunched in a
narrow interval.  The cubics are integrated in closed form over the shared
quality interval.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Hashable, Mapping, Sequence

import numpy as np

from .errors import CurveValidationError, InsufficientDataError, NoOverlapError, ParseError

MIN_POINTS = 4
DEGREE = 3


@dataclass(frozen=True)
class RdPoint:
    rate: float
    quality: float
    label: str = ""

    def __post_init__(self) -> None:
        if not (math.isfinite(self.rate) and self.rate > 0):
            raise CurveValidationError(f"rate must be positive and finite, got {self.rate!r}")
        if not math.isfinite(self.quality):
            raise CurveValidationError(f"quality must be finite, got {self.quality!r}")


@dataclass(frozen=True)
class RdCurve:
    """Rate-quality points, stored sorted by ascending quality.

    Construction rejects curves where rate does not rise strictly with
    quality instead of reordering them.
    """

    points: tuple[RdPoint, ...]
    name: str = ""

    def __post_init__(self) -> None:
        pts = tuple(sorted(self.points, key=lambda p: p.quality))
        object.__setattr__(self, "points", pts)
        if len(pts) < MIN_POINTS:
            raise InsufficientDataError(f"curve {self.name!r} has {len(pts)} points, need at least {MIN_POINTS}")
        for a, b in zip(pts, pts[1:]):
            if not b.quality > a.quality:
                raise CurveValidationError(
                    f"curve {self.name!r}: quality does not increase strictly "
                    f"({a.label or a.quality} -> {b.label or b.quality})"
                )
            if not b.rate > a.rate:
                raise CurveValidationError(
                    f"curve {self.name!r}: rate does not increase with quality "
                    f"({a.label}: rate {a.rate}, q {a.quality}; {b.label}: rate {b.rate}, q {b.quality})"
                )

    @classmethod
    def from_arrays(cls, rates: Sequence[float], qualities: Sequence[float], name: str = "",
                    labels: Sequence[str] | None = None) -> RdCurve:
        labels = labels or [""] * len(rates)
        return cls(tuple(RdPoint(float(r), float(q), str(lab)) for r, q, lab in zip(rates, qualities, labels)), name)

    @property
    def rates(self) -> np.ndarray:
        return np.array([p.rate for p in self.points])

    @property
    def qualities(self) -> np.ndarray:
        return np.array([p.quality for p in self.points])


@dataclass(frozen=True)
class _LogRateFit:
    coeffs: np.ndarray  # ascending powers of the local variable
    center: float
    half_width: float

    def antiderivative(self, q: float) -> float:
        u = (q - self.center) / self.half_width
        powers = np.arange(1, len(self.coeffs) + 1)
        return float(self.half_width * np.sum(self.coeffs * u ** powers / powers))

    def integral(self, lo: float, hi: float) -> float:
        return self.antiderivative(hi) - self.antiderivative(lo)


def _fit(curve: RdCurve) -> _LogRateFit:
    q = curve.qualities
    lo, hi = q[0], q[-1]
    center = (lo + hi) / 2.0
    half = (hi - lo) / 2.0
    u = (q - center) / half
    vander = np.vander(u, DEGREE + 1, increasing=True)
    coeffs, *_ = np.linalg.lstsq(vander, np.log10(curve.rates), rcond=None)
    return _LogRateFit(coeffs, center, half)


def overlap_interval(test: RdCurve, anchor: RdCurve) -> tuple[float, float]:
    lo = max(test.points[0].quality, anchor.points[0].quality)
    hi = min(test.points[-1].quality, anchor.points[-1].quality)
    if not hi > lo:
        raise NoOverlapError(
            f"quality ranges of {test.name!r} and {anchor.name!r} do not overlap ([{lo}, {hi}] is empty)"
        )
    return lo, hi


def mean_log_rate_difference(test: RdCurve, anchor: RdCurve) -> float:
    """Average of log10(rate_test) - log10(rate_anchor) over the shared quality interval."""
    lo, hi = overlap_interval(test, anchor)
    diff = _fit(test).integral(lo, hi) - _fit(anchor).integral(lo, hi)
    return diff / (hi - lo)


def bd_rate(test: RdCurve, anchor: RdCurve) -> float:
    """Average bitrate difference of ``test`` against ``anchor`` in percent at equal quality.

    Negative values mean ``test`` needs fewer bits.
    """
    return (10.0 ** mean_log_rate_difference(test, anchor) - 1.0) * 100.0


# ---------------------------------------------------------------- CSV I/O

CURVE_HEADER = ["name", "label", "rate", "quality"]


def parse_curves_csv(text: str, source: str = "<memory>") -> dict[str, RdCurve]:
    reader = csv.reader(io.StringIO(text))
    rows = [r for r in reader if r and not r[0].startswith("#")]
    if not rows:
        raise ParseError(f"{source}: empty curve file")
    if [c.strip() for c in rows[0]] == CURVE_HEADER:
        rows = rows[1:]
    grouped: dict[str, list[RdPoint]] = {}
    for lineno, row in enumerate(rows, 2):
        if len(row) != 4:
            raise ParseError(f"{source}: row {lineno}: expected 4 columns name,label,rate,quality")
        name, label, rate, quality = (c.strip() for c in row)
        try:
            point = RdPoint(float(rate), float(quality), label)
        except ValueError as exc:
            raise ParseError(f"{source}: row {lineno}: {exc}") from None
        grouped.setdefault(name, []).append(point)
    return {name: RdCurve(tuple(pts), name) for name, pts in grouped.items()}


def read_curves_csv(path: str | Path) -> dict[str, RdCurve]:
    path = Path(path)
    return parse_curves_csv(path.read_text(encoding="utf-8"), str(path))


def curves_to_csv(curves: Sequence[RdCurve]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CURVE_HEADER)
    for curve in curves:
        for p in curve.points:
            writer.writerow([curve.name, p.label, repr(p.rate), repr(p.quality)])
    return buf.getvalue()


def matrix_to_csv(
    corner: str,
    row_keys: Sequence[Hashable],
    col_keys: Sequence[Hashable],
    cells: Mapping[tuple, float | str],
    fmt: str = "{:.6f}",
) -> str:
    """Render a BD-rate matrix with a trailing ``best`` column per row.

    Numeric cells are formatted with ``fmt``; string cells (status markers
    such as ``pending``) pass through.  ``best`` names the column holding the
    row's lowest BD-rate, i.e. the largest saving.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([corner, *map(str, col_keys), "best"])
    for r in row_keys:
        values = [cells.get((r, c), "pending") for c in col_keys]
        numeric = [(v, str(c)) for v, c in zip(values, col_keys) if isinstance(v, float)]
        best = min(numeric, key=lambda vc: vc[0])[1] if numeric else ""
        writer.writerow([str(r), *(fmt.format(v) if isinstance(v, float) else v for v in values), best])
    return buf.getvalue()
