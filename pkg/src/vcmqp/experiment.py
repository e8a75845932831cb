"""Parameter sweeps over (detector, theta, QP offset, base QP) and their reports.

A corpus directory holds::

    images/<image_id>.pgm
    gt/<image_id>.json                    vcm-inst/1 ground truth
    detections/<detector>/<image_id>.json vcm-det/1, one directory per detector

A sweep writes::

    out/cache/<key>/{decoded.pgm, bits.txt}          content-addressed encodes
    out/cells/<detector>/<theta>/<delta>/<qp_base>/<image_id>/{qpmap, bits.txt, decoded.pgm}
    out/cells/anchor/<qp_base>/<image_id>/...
    out/result.json

Quality comes from one of two providers.  ``predictions`` reads instance
files produced offline by any segmenter from the decoded images, laid out
like ``cells/`` (``<predictions_dir>/<detector>/<theta>/<delta>/<qp_base>/<image_id>.json``
and ``<predictions_dir>/anchor/<qp_base>/<image_id>.json``); missing files
leave the cell ``pending``.  ``mock`` is a hermetic stand-in used by the test
suite; see :func:`survival_predictions`.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import shutil
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence
from xml.sax.saxutils import escape

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .bdrate import RdCurve, RdPoint, bd_rate, matrix_to_csv
from .codec import (
    MOCK_ENCODER_ID,
    CommandTemplate,
    Image,
    external_encode,
    load_template,
    mock_encode,
    read_image,
)
from .errors import DataError, IntegrityError, ParseError
from .geometry import CtuGrid, decide_saliency
from .ingest import CITYSCAPES_CLASSES, ClassMap, ImageRecord, load_class_map, load_detection_dir, load_instance_dir
from .masks import Instance, InstanceMask, InstanceSet
from .metrics import DEFAULT_IOU_THRESHOLDS, weighted_ap
from .qpmap import QpDelta, QpMap, assign_qps, atomic_write_text, parse_qp_delta

log = logging.getLogger(__name__)

ANCHOR = "anchor"
PENDING = "pending"
INVALID = "invalid"
OK = "ok"


# ---------------------------------------------------------------- configuration


@dataclass(frozen=True)
class SweepConfig:
    thetas: tuple[float, ...] = (0.0, 0.025, 0.05, 0.1)
    qp_deltas: tuple[QpDelta, ...] = (5, 10, 20, "max")
    qp_bases: tuple[int, ...] = (12, 17, 22, 27)
    # detector name -> detection file or directory; empty means every
    # subdirectory of <corpus>/detections
    detectors: Mapping[str, str] = field(default_factory=dict)
    ctu_size: int = 128
    codec: str = "mock"
    quality: str = "mock"
    predictions_dir: str | None = None
    classes: tuple[str, ...] = CITYSCAPES_CLASSES
    class_map: str | None = None
    min_score: float = 0.0
    iou_thresholds: tuple[float, ...] = DEFAULT_IOU_THRESHOLDS
    uncompressed_quality: float | None = None
    anchor: str = "constant-qp"

    def __post_init__(self) -> None:
        for name in ("thetas", "qp_deltas", "qp_bases"):
            if not getattr(self, name):
                raise ParseError(f"sweep config: {name} must not be empty")
        for t in self.thetas:
            if not 0 <= t < 1:
                raise ParseError(f"sweep config: theta {t!r} outside [0, 1)")
        object.__setattr__(self, "qp_deltas", tuple(parse_qp_delta(d) for d in self.qp_deltas))
        for qb in self.qp_bases:
            if not 0 <= qb <= 63:
                raise ParseError(f"sweep config: qp_base {qb!r} outside [0, 63]")
        if self.quality not in ("mock", "predictions"):
            raise ParseError(f"sweep config: quality must be 'mock' or 'predictions', got {self.quality!r}")
        if self.quality == "predictions" and not self.predictions_dir:
            raise ParseError("sweep config: quality 'predictions' needs predictions_dir")
        if self.anchor != "constant-qp":
            raise ParseError(f"sweep config: only the 'constant-qp' anchor is supported, got {self.anchor!r}")

    @property
    def codec_id(self) -> str:
        if self.codec == "mock":
            return MOCK_ENCODER_ID
        return load_template(self.codec).identity

    def summary(self) -> dict:
        """The parts of the configuration that determine results, path-free."""
        return {
            "thetas": list(self.thetas),
            "qp_deltas": list(self.qp_deltas),
            "qp_bases": list(self.qp_bases),
            "detectors": sorted(self.detectors),
            "ctu_size": self.ctu_size,
            "codec": self.codec_id,
            "quality": self.quality,
            "classes": list(self.classes),
            "min_score": self.min_score,
            "iou_thresholds": list(self.iou_thresholds),
            "anchor": self.anchor,
        }


_LIST_KEYS = {"thetas", "qp_deltas", "qp_bases", "classes", "iou_thresholds"}
_SCALAR_KEYS = {
    "ctu_size", "codec", "quality", "predictions_dir", "class_map",
    "min_score", "uncompressed_quality", "anchor",
}
_PATH_KEYS = {"predictions_dir", "class_map"}


def parse_config(text: str, base_dir: str | Path = ".") -> SweepConfig:
    """Parse a TOML sweep configuration.

    Relative paths for ``codec`` (when not ``mock``), ``class_map`` and
    ``predictions_dir`` resolve against ``base_dir``; detector paths stay
    relative to the corpus.
    """
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"sweep config: {exc}") from None
    base = Path(base_dir)
    kwargs: dict[str, Any] = {}
    for key, value in data.items():
        if key == "detectors":
            if not isinstance(value, dict):
                raise ParseError("sweep config: [detectors] must be a table of name = path")
            kwargs["detectors"] = {str(k): str(v) for k, v in value.items()}
        elif key in _LIST_KEYS:
            if not isinstance(value, list):
                raise ParseError(f"sweep config: {key} must be a list")
            kwargs[key] = tuple(value)
        elif key in _SCALAR_KEYS:
            if key in _PATH_KEYS or (key == "codec" and value != "mock"):
                value = str(base / value)
            kwargs[key] = value
        elif key in ("seed", "jobs"):
            continue
        else:
            raise ParseError(f"sweep config: unknown key {key!r}")
    try:
        return SweepConfig(**kwargs)
    except TypeError as exc:
        raise ParseError(f"sweep config: {exc}") from None


def load_config(path: str | Path) -> SweepConfig:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), path.parent)


def fmt_theta(theta: float) -> str:
    return f"{theta:g}"


# ---------------------------------------------------------------- corpus


@dataclass
class Corpus:
    image_ids: list[str]
    image_paths: dict[str, Path]
    ground_truth: dict[str, InstanceSet]
    detections: dict[str, dict[str, ImageRecord]]

    def image(self, image_id: str) -> Image:
        return read_image(self.image_paths[image_id])


def load_corpus(corpus_dir: str | Path, cfg: SweepConfig) -> Corpus:
    root = Path(corpus_dir)
    image_paths = {p.stem: p for p in sorted((root / "images").glob("*")) if p.suffix.lower() in (".pgm", ".png")}
    if not image_paths:
        raise DataError(f"{root}/images holds no .pgm or .png images")
    ids = sorted(image_paths)
    gt = load_instance_dir(root / "gt", ground_truth=True)
    if set(gt) != set(ids):
        raise IntegrityError(
            f"ground truth covers {sorted(gt)} but images are {ids}"
        )
    class_map = load_class_map(cfg.class_map, cfg.classes) if cfg.class_map else ClassMap(
        ClassMap.cityscapes().entries if set(cfg.classes) == set(CITYSCAPES_CLASSES) else {}, cfg.classes
    )
    sources = dict(cfg.detectors)
    if not sources:
        det_root = root / "detections"
        sources = {p.name: f"detections/{p.name}" for p in sorted(det_root.iterdir()) if p.is_dir()} if det_root.is_dir() else {}
    if not sources:
        raise DataError(f"no detector sources configured and none found under {root}/detections")
    detections = {}
    for name in sorted(sources):
        src = Path(sources[name])
        if not src.is_absolute():
            src = root / src
        records = load_detection_dir(src, class_map, cfg.min_score)
        if set(records) != set(ids):
            raise IntegrityError(f"detector {name!r} covers {sorted(records)} but images are {ids}")
        detections[name] = records
    return Corpus(ids, image_paths, gt, detections)


# ---------------------------------------------------------------- quality providers


def survival_predictions(original: Image, decoded: Image, gt: InstanceSet, margin: int = 8) -> InstanceSet:
    """Hermetic stand-in for a segmenter run on the decoded image.

    For each ground-truth instance, a pixel of its mask "survives" when its
    decoded luma is within a quarter of the instance's contrast (mean inside
    the mask vs. mean of the surrounding ``margin``-pixel ring outside all
    instances) of the original, with a floor of half a grey level.  The
    surviving pixels form the predicted mask, so its IoU with the ground truth
    is the survival fraction, which is also used as the score.  Instances with
    no surviving pixel are missed.
    """
    orig = original.luma.astype(np.float64)
    dec = decoded.luma.astype(np.float64)
    covered = np.zeros(orig.shape, dtype=bool)
    for inst in gt.instances:
        covered |= inst.mask.array
    err = np.abs(dec - orig)
    preds = []
    for inst in gt.instances:
        mask = inst.mask.array
        ys, xs = np.nonzero(mask)
        y0, y1 = max(ys.min() - margin, 0), min(ys.max() + margin + 1, orig.shape[0])
        x0, x1 = max(xs.min() - margin, 0), min(xs.max() + margin + 1, orig.shape[1])
        ring = np.zeros_like(mask)
        ring[y0:y1, x0:x1] = True
        ring &= ~covered
        if not ring.any():
            ring = ~covered
        fg = float(orig[mask].mean())
        bg = float(orig[ring].mean()) if ring.any() else 0.0
        tol = max(abs(fg - bg) / 4.0, 0.5)
        alive = mask & (err <= tol)
        n_alive = int(alive.sum())
        if n_alive == 0:
            continue
        score = n_alive / inst.mask.pixel_count
        preds.append(Instance(inst.id, inst.class_label, score, InstanceMask.from_array(alive)))
    return InstanceSet(gt.image_id, gt.width, gt.height, tuple(preds))


# ---------------------------------------------------------------- results


@dataclass(frozen=True)
class CellResult:
    detector: str
    theta: float | None
    qp_delta: QpDelta | None
    status: str
    points: tuple[RdPoint, ...] = ()
    bd_rate: float | None = None
    message: str = ""

    @property
    def key(self) -> tuple:
        return (self.detector, self.theta, self.qp_delta)

    @property
    def curve(self) -> RdCurve:
        return RdCurve(self.points, self.name)

    @property
    def name(self) -> str:
        if self.detector == ANCHOR:
            return ANCHOR
        return f"{self.detector}/theta={fmt_theta(self.theta)}/delta={self.qp_delta}"

    def to_dict(self) -> dict:
        return {
            "detector": self.detector,
            "theta": self.theta,
            "qp_delta": self.qp_delta,
            "status": self.status,
            "bd_rate": self.bd_rate,
            "message": self.message,
            "points": [{"qp_base": p.label, "rate": p.rate, "quality": p.quality} for p in self.points],
        }

    @classmethod
    def from_dict(cls, d: dict) -> CellResult:
        points = tuple(RdPoint(p["rate"], p["quality"], p["qp_base"]) for p in d["points"])
        return cls(d["detector"], d["theta"], d["qp_delta"], d["status"], points, d["bd_rate"], d["message"])


@dataclass(frozen=True)
class SweepResult:
    config: dict
    image_ids: tuple[str, ...]
    anchor: CellResult
    cells: Mapping[tuple, CellResult]
    uncompressed_quality: float | None = None

    @property
    def detectors(self) -> list[str]:
        return list(self.config["detectors"])

    @property
    def thetas(self) -> list[float]:
        return list(self.config["thetas"])

    @property
    def qp_deltas(self) -> list[QpDelta]:
        return list(self.config["qp_deltas"])

    def cell(self, detector: str, theta: float, qp_delta: QpDelta) -> CellResult:
        return self.cells[(detector, theta, qp_delta)]

    def to_json(self) -> str:
        payload = {
            "config": self.config,
            "image_ids": list(self.image_ids),
            "uncompressed_quality": self.uncompressed_quality,
            "anchor": self.anchor.to_dict(),
            "cells": [c.to_dict() for c in self.cells.values()],
        }
        return json.dumps(payload, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> SweepResult:
        d = json.loads(text)
        cells = {}
        for raw in d["cells"]:
            cell = CellResult.from_dict(raw)
            cells[cell.key] = cell
        return cls(d["config"], tuple(d["image_ids"]), CellResult.from_dict(d["anchor"]), cells,
                   d["uncompressed_quality"])

    @classmethod
    def load(cls, path: str | Path) -> SweepResult:
        path = Path(path)
        if path.is_dir():
            path = path / "result.json"
        return cls.from_json(path.read_text(encoding="utf-8"))


@dataclass
class SweepStats:
    encodes: int = 0
    cache_hits: int = 0


# ---------------------------------------------------------------- encoding jobs


def _encode_key(codec_id: str, img_digest: str, qpmap: QpMap) -> str:
    h = hashlib.sha256()
    g = qpmap.grid
    h.update(f"{codec_id}\n{img_digest}\n{g.image_width} {g.image_height} {g.ctu_size}\n".encode())
    h.update(" ".join(map(str, qpmap.qps)).encode())
    return h.hexdigest()


def _read_bits(path: Path) -> float:
    text = path.read_text(encoding="utf-8").strip()
    return float(int(text)) if text.isdigit() else float(text)


def _link_or_copy(src: Path, dst: Path) -> None:
    dst.parent.mkdir(parents=True, exist_ok=True)
    tmp = dst.with_name(f".{dst.name}.{os.getpid()}.tmp")
    tmp.unlink(missing_ok=True)
    try:
        os.link(src, tmp)
    except OSError:
        shutil.copyfile(src, tmp)
    os.replace(tmp, dst)


class _Encoder:
    def __init__(self, cfg: SweepConfig, out: Path, stats: SweepStats) -> None:
        self.cfg = cfg
        self.out = out
        self.stats = stats
        self.codec_id = cfg.codec_id
        self.template: CommandTemplate | None = None if cfg.codec == "mock" else load_template(cfg.codec)

    def encode(self, img: Image, digest: str, qpmap: QpMap) -> tuple[Path, float]:
        """Return the cache directory and bit count, encoding only on a cache miss."""
        key = _encode_key(self.codec_id, digest, qpmap)
        final = self.out / "cache" / key
        if (final / "bits.txt").is_file() and (final / "decoded.pgm").is_file():
            self.stats.cache_hits += 1
            return final, _read_bits(final / "bits.txt")
        final.parent.mkdir(parents=True, exist_ok=True)
        tmp = Path(tempfile.mkdtemp(dir=final.parent, prefix=f".{key[:12]}."))
        try:
            if self.template is None:
                result = mock_encode(img, qpmap)
            else:
                result = external_encode(img, qpmap, self.template, tmp / "work")
                shutil.rmtree(tmp / "work", ignore_errors=True)
            (tmp / "decoded.pgm").write_bytes(
                b"P5\n%d %d\n255\n" % (img.width, img.height) + result.decoded.luma.tobytes()
            )
            bits = result.bits
            (tmp / "bits.txt").write_text(f"{bits!r}\n" if isinstance(bits, float) else f"{bits}\n", encoding="utf-8")
            try:
                os.rename(tmp, final)
            except OSError:
                # another worker finished the same key first
                shutil.rmtree(tmp, ignore_errors=True)
        except BaseException:
            shutil.rmtree(tmp, ignore_errors=True)
            raise
        self.stats.encodes += 1
        return final, _read_bits(final / "bits.txt")


@dataclass(frozen=True)
class _Job:
    cell_dir: Path  # .../<qp_base>
    image_id: str
    qpmap: QpMap


@dataclass(frozen=True)
class _JobOutput:
    bits: float
    predictions: InstanceSet | None


def _cell_points(
    jobs: Sequence[_Job], outputs: Mapping[tuple[Path, str], _JobOutput], image_ids: Sequence[str],
    gts: Sequence[InstanceSet], cfg: SweepConfig,
) -> tuple[list[RdPoint], list[int]]:
    points = []
    pending = []
    by_base: dict[int, list[_Job]] = {}
    for job in jobs:
        by_base.setdefault(job.qpmap.qp_base, []).append(job)
    for qb in cfg.qp_bases:
        outs = [outputs[(j.cell_dir, j.image_id)] for j in by_base[qb]]
        if any(o.predictions is None for o in outs):
            pending.append(qb)
            continue
        rate = math.fsum(o.bits for o in outs) / len(outs)
        report = weighted_ap([o.predictions for o in outs], gts, cfg.classes, cfg.iou_thresholds)
        points.append(RdPoint(rate, report.weighted_ap, str(qb)))
    return points, pending


def _finish_cell(
    detector, theta, delta, points, pending, anchor_curve: RdCurve | None, anchor_status: str, anchor_msg: str
) -> CellResult:
    if pending:
        return CellResult(detector, theta, delta, PENDING, tuple(points),
                          message=f"missing predictions for qp_base {pending}")
    try:
        curve = RdCurve(tuple(points), detector)
    except DataError as exc:
        return CellResult(detector, theta, delta, INVALID, tuple(points), message=str(exc))
    if detector == ANCHOR:
        return CellResult(detector, theta, delta, OK, tuple(points))
    if anchor_curve is None:
        # an anchor still waiting for predictions leaves the cell waiting too
        status = PENDING if anchor_status == PENDING else INVALID
        return CellResult(detector, theta, delta, status, tuple(points), message=f"anchor {anchor_status}: {anchor_msg}")
    try:
        value = bd_rate(curve, anchor_curve)
    except DataError as exc:
        return CellResult(detector, theta, delta, INVALID, tuple(points), message=str(exc))
    return CellResult(detector, theta, delta, OK, tuple(points), value)


def run_sweep(
    cfg: SweepConfig,
    corpus_dir: str | Path,
    out_dir: str | Path,
    jobs: int | None = None,
    stats: SweepStats | None = None,
) -> SweepResult:
    """Run every grid cell plus the constant-QP anchor and write ``result.json``.

    Encodes are cached by content hash of (codec, image, QP values), so the
    anchor, offset-0 cells and cells with identical saliency masks share work,
    and a rerun after an interruption only redoes missing encodes.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stats = stats if stats is not None else SweepStats()
    corpus = load_corpus(corpus_dir, cfg)
    detectors = sorted(corpus.detections)
    cfg_summary = cfg.summary()
    cfg_summary["detectors"] = detectors
    encoder = _Encoder(cfg, out, stats)
    ids = corpus.image_ids
    gts = [corpus.ground_truth[i] for i in ids]
    images = {i: corpus.image(i) for i in ids}
    for i in ids:
        gt = corpus.ground_truth[i]
        if (gt.width, gt.height) != (images[i].width, images[i].height):
            raise IntegrityError(f"image {i!r} is {images[i].width}x{images[i].height}, ground truth says {gt.width}x{gt.height}")
    digests = {i: images[i].digest() for i in ids}
    grids = {i: CtuGrid(images[i].width, images[i].height, cfg.ctu_size) for i in ids}

    # (detector, theta, delta) -> jobs; anchor keyed (ANCHOR, None, None)
    plan: dict[tuple, list[_Job]] = {}
    cells_root = out / "cells"
    anchor_jobs = []
    for qb in cfg.qp_bases:
        for i in ids:
            anchor_jobs.append(_Job(cells_root / ANCHOR / str(qb), i, QpMap.uniform(grids[i], qb, i)))
    plan[(ANCHOR, None, None)] = anchor_jobs
    for det in detectors:
        for theta in cfg.thetas:
            masks = {
                i: decide_saliency(grids[i], corpus.detections[det][i].boxes(), theta) for i in ids
            }
            for delta in cfg.qp_deltas:
                cell_jobs = []
                for qb in cfg.qp_bases:
                    base_dir = cells_root / det / fmt_theta(theta) / str(delta) / str(qb)
                    for i in ids:
                        cell_jobs.append(_Job(base_dir, i, assign_qps(masks[i], qb, delta, i)))
                plan[(det, theta, delta)] = cell_jobs

    def prediction_path(job: _Job) -> Path:
        rel = job.cell_dir.relative_to(cells_root)
        return Path(cfg.predictions_dir) / rel / f"{job.image_id}.json"

    def run(job: _Job) -> _JobOutput:
        cache_dir, bits = encoder.encode(images[job.image_id], digests[job.image_id], job.qpmap)
        target = job.cell_dir / job.image_id
        atomic_write_text(target / "qpmap", job.qpmap.to_text())
        atomic_write_text(target / "bits.txt", (cache_dir / "bits.txt").read_text(encoding="utf-8"))
        _link_or_copy(cache_dir / "decoded.pgm", target / "decoded.pgm")
        if cfg.quality == "mock":
            decoded = read_image(cache_dir / "decoded.pgm")
            preds = survival_predictions(images[job.image_id], decoded, corpus.ground_truth[job.image_id])
        else:
            path = prediction_path(job)
            preds = None
            if path.is_file():
                found = load_instance_dir(path)
                if job.image_id not in found:
                    raise IntegrityError(f"{path} does not describe image {job.image_id!r}")
                preds = found[job.image_id]
        return _JobOutput(bits, preds)

    all_jobs = [job for cell_jobs in plan.values() for job in cell_jobs]
    workers = jobs or os.cpu_count() or 1
    with ThreadPoolExecutor(max_workers=workers) as pool:
        outputs_list = list(pool.map(run, all_jobs))
    outputs = {(j.cell_dir, j.image_id): o for j, o in zip(all_jobs, outputs_list)}

    points, pending = _cell_points(anchor_jobs, outputs, ids, gts, cfg)
    anchor = _finish_cell(ANCHOR, None, None, points, pending, None, "", "")
    anchor_curve = None
    if anchor.status == OK:
        anchor_curve = RdCurve(anchor.points, ANCHOR)
    cells = {}
    for key, cell_jobs in plan.items():
        if key[0] == ANCHOR:
            continue
        points, pending = _cell_points(cell_jobs, outputs, ids, gts, cfg)
        cells[key] = _finish_cell(*key, points, pending, anchor_curve, anchor.status, anchor.message)

    uncompressed = cfg.uncompressed_quality
    if uncompressed is None:
        uncompressed = _uncompressed_quality(cfg, images, corpus, ids, gts)
    result = SweepResult(cfg_summary, tuple(ids), anchor, cells, uncompressed)
    atomic_write_text(out / "result.json", result.to_json())
    return result


def _uncompressed_quality(cfg, images, corpus, ids, gts) -> float | None:
    if cfg.quality == "mock":
        preds = [survival_predictions(images[i], images[i], corpus.ground_truth[i]) for i in ids]
    else:
        root = Path(cfg.predictions_dir) / "uncompressed"
        paths = [root / f"{i}.json" for i in ids]
        if not all(p.is_file() for p in paths):
            return None
        preds = [load_instance_dir(p)[i] for p, i in zip(paths, ids)]
    return weighted_ap(preds, gts, cfg.classes, cfg.iou_thresholds).weighted_ap


# ---------------------------------------------------------------- reports


def _bdr_cell(cell: CellResult | None) -> float | str:
    if cell is None:
        return PENDING
    if cell.status == OK:
        return float(cell.bd_rate)
    return cell.status


def report_tables(result: SweepResult, out_dir: str | Path, table2_theta: float | None = None) -> list[Path]:
    """Write BD-rate tables.

    ``bdr_<detector>.csv`` has one row per QP offset and one column per theta;
    ``bdr_detectors.csv`` has one row per detector and one column per QP
    offset at ``table2_theta`` (default: the smallest theta).  The ``best``
    column names the cell with the largest saving in each row.
    """
    tables = Path(out_dir) / "tables"
    tables.mkdir(parents=True, exist_ok=True)
    written = []
    for det in result.detectors:
        cells = {
            (delta, theta): _bdr_cell(result.cells.get((det, theta, delta)))
            for theta in result.thetas for delta in result.qp_deltas
        }
        text = matrix_to_csv("qp_delta\\theta", result.qp_deltas, [fmt_theta(t) for t in result.thetas],
                             {(d, fmt_theta(t)): v for (d, t), v in cells.items()})
        path = tables / f"bdr_{det}.csv"
        atomic_write_text(path, text)
        written.append(path)

    theta = min(result.thetas) if table2_theta is None else table2_theta
    cells = {
        (det, str(delta)): _bdr_cell(result.cells.get((det, theta, delta)))
        for det in result.detectors for delta in result.qp_deltas
    }
    text = matrix_to_csv(f"detector\\qp_delta@theta={fmt_theta(theta)}", result.detectors,
                         [str(d) for d in result.qp_deltas], cells)
    path = tables / "bdr_detectors.csv"
    atomic_write_text(path, text)
    written.append(path)
    return written


def default_curve_cell(result: SweepResult) -> tuple[float, QpDelta]:
    theta = min(result.thetas)
    delta = "max" if "max" in result.qp_deltas else max(result.qp_deltas)
    return theta, delta


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def _svg(series: Sequence[tuple[str, list[RdPoint], str, str]], reference: float | None) -> str:
    width, height = 640, 420
    left, right, top, bottom = 70, 150, 20, 50
    pts = [p for _, s, _, _ in series for p in s]
    xs = [p.rate for p in pts] or [0.0, 1.0]
    ys = [p.quality for p in pts] + ([reference] if reference is not None else [])
    ys = ys or [0.0, 1.0]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    pw, ph = width - left - right, height - top - bottom

    def sx(v: float) -> str:
        return f"{left + (v - x0) / (x1 - x0) * pw:.3f}"

    def sy(v: float) -> str:
        return f"{top + ph - (v - y0) / (y1 - y0) * ph:.3f}"

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#000"/>',
        f'<text x="{left + pw / 2:.1f}" y="{height - 10}" text-anchor="middle" font-size="13">Rate [bits/image]</text>',
        f'<text x="15" y="{top + ph / 2:.1f}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 15 {top + ph / 2:.1f})">Weighted AP</text>',
        f'<text x="{left}" y="{top + ph + 16}" font-size="10">{x0:.6g}</text>',
        f'<text x="{left + pw}" y="{top + ph + 16}" font-size="10" text-anchor="end">{x1:.6g}</text>',
        f'<text x="{left - 4}" y="{top + ph}" font-size="10" text-anchor="end">{y0:.4f}</text>',
        f'<text x="{left - 4}" y="{top + 10}" font-size="10" text-anchor="end">{y1:.4f}</text>',
    ]
    if reference is not None:
        out.append(
            f'<line class="uncompressed" x1="{left}" x2="{left + pw}" y1="{sy(reference)}" y2="{sy(reference)}" '
            'stroke="#000" stroke-dasharray="2,3"/>'
        )
    for n, (name, s, color, dash) in enumerate(series):
        ordered = sorted(s, key=lambda p: p.rate)
        coords = " ".join(f"{sx(p.rate)},{sy(p.quality)}" for p in ordered)
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        out.append(
            f'<polyline data-name="{escape(name)}" points="{coords}" fill="none" stroke="{color}"{dash_attr} stroke-width="1.5"/>'
        )
        ly = top + 14 + 16 * n
        out.append(f'<line x1="{left + pw + 10}" x2="{left + pw + 30}" y1="{ly}" y2="{ly}" stroke="{color}"{dash_attr}/>')
        out.append(f'<text x="{left + pw + 34}" y="{ly + 4}" font-size="11">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def report_curves(
    result: SweepResult,
    out_dir: str | Path,
    theta: float | None = None,
    qp_delta: QpDelta | None = None,
    uncompressed_quality: float | None = None,
) -> list[Path]:
    """Write ``curves/<detector>.csv`` for one (theta, offset) cell and ``curves/rate_ap.svg``.

    The SVG draws each detector's curve, the anchor (dashed) and, when a
    quality for uncompressed input is known, a dotted horizontal line.
    """
    default_theta, default_delta = default_curve_cell(result)
    theta = default_theta if theta is None else theta
    qp_delta = default_delta if qp_delta is None else parse_qp_delta(qp_delta)
    reference = result.uncompressed_quality if uncompressed_quality is None else uncompressed_quality
    curves = Path(out_dir) / "curves"
    curves.mkdir(parents=True, exist_ok=True)
    written = []
    series = []
    for n, det in enumerate(result.detectors):
        cell = result.cells.get((det, theta, qp_delta))
        points = list(cell.points) if cell else []
        lines = ["qp_base,rate,weighted_ap"] + [f"{p.label},{p.rate!r},{p.quality!r}" for p in points]
        path = curves / f"{det}.csv"
        atomic_write_text(path, "\n".join(lines) + "\n")
        written.append(path)
        series.append((det, points, _PALETTE[n % len(_PALETTE)], ""))
    series.append((ANCHOR, list(result.anchor.points), "#000000", "6,3"))
    svg = curves / "rate_ap.svg"
    atomic_write_text(svg, _svg(series, reference))
    written.append(svg)
    return written
