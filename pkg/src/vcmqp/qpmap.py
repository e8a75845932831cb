"""Per-CTU QP maps and their text sidecar format.

Sidecar layout (UTF-8, LF line endings)::

    qpmap/1
    image_id <id>
    ctu_size <int>  image <W> <H>  grid <cols> <rows>  qp_base <int>  qp_delta <int|max>
    <cols space-separated QPs>      (one line per CTU row)

The ``qp_base``/``qp_delta`` pair on line 3 is optional on read; files that
omit it load with ``qp_base`` set to the smallest QP present and
``qp_delta`` set to the spread, which only works for two-level maps.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Union

from .errors import FormatError, RangeError
from .geometry import CtuGrid, SaliencyMask

MIN_QP = 0
MAX_QP = 63
MAGIC = "qpmap/1"

QpDelta = Union[int, Literal["max"]]


def parse_qp_delta(value: str | int) -> QpDelta:
    if isinstance(value, str):
        if value.strip().lower() == "max":
            return "max"
        try:
            value = int(value)
        except ValueError:
            raise RangeError(f"qp_delta must be a non-negative integer or 'max', got {value!r}") from None
    if isinstance(value, bool) or value < 0:
        raise RangeError(f"qp_delta must be a non-negative integer or 'max', got {value!r}")
    return int(value)


def non_salient_qp(qp_base: int, qp_delta: QpDelta) -> int:
    if qp_delta == "max":
        return MAX_QP
    return min(qp_base + qp_delta, MAX_QP)


@dataclass(frozen=True)
class QpMap:
    grid: CtuGrid
    qps: tuple[int, ...]
    qp_base: int
    qp_delta: QpDelta
    image_id: str = ""

    def __post_init__(self) -> None:
        if len(self.qps) != len(self.grid):
            raise FormatError(
                f"QP map has {len(self.qps)} values for a {self.grid.cols}x{self.grid.rows} grid"
            )
        for qp in self.qps:
            if not MIN_QP <= qp <= MAX_QP:
                raise RangeError(f"QP {qp} outside [{MIN_QP}, {MAX_QP}]")
        if not MIN_QP <= self.qp_base <= MAX_QP:
            raise RangeError(f"qp_base {self.qp_base} outside [{MIN_QP}, {MAX_QP}]")
        allowed = {self.qp_base, non_salient_qp(self.qp_base, self.qp_delta)}
        stray = set(self.qps) - allowed
        if stray:
            raise FormatError(
                f"QPs {sorted(stray)} are neither qp_base {self.qp_base} nor the "
                f"non-salient QP {non_salient_qp(self.qp_base, self.qp_delta)}"
            )

    @property
    def salient_flags(self) -> tuple[bool, ...]:
        return tuple(q == self.qp_base for q in self.qps)

    @classmethod
    def uniform(cls, grid: CtuGrid, qp: int, image_id: str = "") -> QpMap:
        return assign_qps(SaliencyMask.uniform(grid, True), qp, 0, image_id)

    def rows(self) -> list[tuple[int, ...]]:
        c = self.grid.cols
        return [self.qps[r * c:(r + 1) * c] for r in range(self.grid.rows)]

    def to_text(self) -> str:
        g = self.grid
        lines = [
            MAGIC,
            f"image_id {self.image_id}",
            f"ctu_size {g.ctu_size}  image {g.image_width} {g.image_height}  grid {g.cols} {g.rows}"
            f"  qp_base {self.qp_base}  qp_delta {self.qp_delta}",
        ]
        lines += [" ".join(str(q) for q in row) for row in self.rows()]
        return "\n".join(lines) + "\n"


def assign_qps(mask: SaliencyMask, qp_base: int, qp_delta: QpDelta, image_id: str = "") -> QpMap:
    """Salient CTUs get ``qp_base``; the rest get ``qp_base + qp_delta`` capped at 63.

    ``qp_delta="max"`` sends every non-salient CTU straight to 63.
    """
    if isinstance(qp_base, bool) or not MIN_QP <= qp_base <= MAX_QP:
        raise RangeError(f"qp_base must lie in [{MIN_QP}, {MAX_QP}], got {qp_base!r}")
    qp_delta = parse_qp_delta(qp_delta)
    low = non_salient_qp(qp_base, qp_delta)
    qps = tuple(qp_base if salient else low for salient in mask.flags)
    return QpMap(mask.grid, qps, qp_base, qp_delta, image_id)


def parse_qpmap(text: str, source: str = "<memory>") -> QpMap:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if len(lines) < 3 or lines[0] != MAGIC:
        raise FormatError(f"{source}: not a {MAGIC} file")
    if not lines[1].startswith("image_id"):
        raise FormatError(f"{source} line 2: expected 'image_id <id>'")
    image_id = lines[1][len("image_id"):].strip()

    header = lines[2].split()
    fields: dict[str, list[str]] = {}
    i = 0
    arity = {"ctu_size": 1, "image": 2, "grid": 2, "qp_base": 1, "qp_delta": 1}
    while i < len(header):
        key = header[i]
        if key not in arity:
            raise FormatError(f"{source} line 3: unknown key {key!r}")
        fields[key] = header[i + 1:i + 1 + arity[key]]
        if len(fields[key]) != arity[key]:
            raise FormatError(f"{source} line 3: key {key!r} needs {arity[key]} value(s)")
        i += 1 + arity[key]
    for key in ("ctu_size", "image", "grid"):
        if key not in fields:
            raise FormatError(f"{source} line 3: missing {key!r}")
    try:
        ctu = int(fields["ctu_size"][0])
        width, height = (int(v) for v in fields["image"])
        cols, rows = (int(v) for v in fields["grid"])
    except ValueError as exc:
        raise FormatError(f"{source} line 3: {exc}") from None
    grid = CtuGrid(width, height, ctu)
    if (cols, rows) != (grid.cols, grid.rows):
        raise FormatError(
            f"{source} line 3: grid {cols}x{rows} does not match image {width}x{height} at CTU {ctu}"
        )

    body = lines[3:]
    if len(body) != rows:
        raise FormatError(f"{source}: expected {rows} QP rows, found {len(body)}")
    qps: list[int] = []
    for r, line in enumerate(body):
        try:
            row = [int(v) for v in line.split()]
        except ValueError as exc:
            raise FormatError(f"{source} line {r + 4}: {exc}") from None
        if len(row) != cols:
            raise FormatError(f"{source} line {r + 4}: expected {cols} QPs, found {len(row)}")
        qps.extend(row)
    for qp in qps:
        if not MIN_QP <= qp <= MAX_QP:
            raise RangeError(f"{source}: QP {qp} outside [{MIN_QP}, {MAX_QP}]")

    if "qp_base" in fields:
        try:
            qp_base = int(fields["qp_base"][0])
        except ValueError as exc:
            raise FormatError(f"{source} line 3: {exc}") from None
        qp_delta = parse_qp_delta(fields.get("qp_delta", ["0"])[0])
    else:
        qp_base = min(qps)
        qp_delta = max(qps) - qp_base
    return QpMap(grid, tuple(qps), qp_base, qp_delta, image_id)


def atomic_write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_qpmap(qpmap: QpMap, path: str | Path) -> None:
    atomic_write_text(path, qpmap.to_text())


def read_qpmap(path: str | Path) -> QpMap:
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_qpmap(fh.read(), str(path))
