"""Reading detection, instance and class-map files.

Detection files (``vcm-det/1``) and instance files (``vcm-inst/1``) hold either
a single image object or a JSON array of them.  Detector labels are mapped
onto a fixed evaluation class set; anything that does not map is dropped.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Mapping

from .errors import IntegrityError, ParseError, SchemaVersionError
from .geometry import Rect
from .masks import Instance, InstanceMask, InstanceSet

log = logging.getLogger(__name__)

DET_SCHEMA = "vcm-det/1"
INST_SCHEMA = "vcm-inst/1"
IGNORE = "ignore"

CITYSCAPES_CLASSES = ("bicycle", "bus", "car", "motorcycle", "person", "rider", "train", "truck")


@dataclass(frozen=True)
class Detection:
    class_label: str
    score: float
    bbox: Rect
    mask: InstanceMask | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.score <= 1.0:
            raise ParseError(f"detection score {self.score!r} outside [0, 1]")
        if self.bbox.area <= 0:
            raise ParseError(f"detection bbox {self.bbox} has zero area")


@dataclass(frozen=True)
class ImageRecord:
    image_id: str
    width: int
    height: int
    detections: tuple[Detection, ...] = ()

    def boxes(self) -> list[Rect]:
        return [d.bbox for d in self.detections]


@dataclass(frozen=True)
class ClassMap:
    """Maps detector labels to evaluation classes.

    Evaluation class names map to themselves unless overridden, which is what
    makes filtering idempotent.
    """

    entries: Mapping[str, str] = field(default_factory=dict)
    classes: tuple[str, ...] = CITYSCAPES_CLASSES

    def __post_init__(self) -> None:
        for label, target in self.entries.items():
            if target != IGNORE and target not in self.classes:
                raise ParseError(f"class map sends {label!r} to unknown class {target!r}")

    def lookup(self, label: str) -> str | None:
        target = self.entries.get(label)
        if target is None and label in self.classes:
            target = label
        if target is None or target == IGNORE:
            return None
        return target

    @classmethod
    def cityscapes(cls) -> ClassMap:
        # darknet's COCO label set spells motorcycle "motorbike"
        return cls({"motorbike": "motorcycle"}, CITYSCAPES_CLASSES)


def parse_class_map(text: str, classes: Iterable[str] = CITYSCAPES_CLASSES) -> ClassMap:
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"class map line {lineno}: expected 'detector_label evaluation_class', got {raw!r}")
        entries[parts[0]] = parts[1]
    return ClassMap(entries, tuple(classes))


def load_class_map(path: str | Path, classes: Iterable[str] = CITYSCAPES_CLASSES) -> ClassMap:
    return parse_class_map(Path(path).read_text(encoding="utf-8"), classes)


def _read_json(path: Path) -> Any:
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not UTF-8 text ({exc})") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


def _objects(data: Any, path: Path) -> list[tuple[str, dict]]:
    if isinstance(data, dict):
        return [("", data)]
    if isinstance(data, list):
        return [(f"[{i}]", obj) for i, obj in enumerate(data)]
    raise ParseError(f"{path}: top level must be an object or an array")


def _field(obj: Any, key: str, kind: type | tuple, where: str) -> Any:
    if not isinstance(obj, dict):
        raise ParseError(f"{where}: expected an object")
    if key not in obj:
        raise ParseError(f"{where}: missing field {key!r}")
    value = obj[key]
    # bool is an int subclass; reject it wherever a number is expected
    if isinstance(value, bool) and bool not in (kind if isinstance(kind, tuple) else (kind,)):
        raise ParseError(f"{where}.{key}: expected {kind}, got a boolean")
    if not isinstance(value, kind):
        raise ParseError(f"{where}.{key}: expected {kind}, got {type(value).__name__}")
    return value


def _check_schema(obj: dict, expected: str, where: str) -> None:
    schema = _field(obj, "schema", str, where)
    if schema != expected:
        raise SchemaVersionError(f"{where}: unsupported schema {schema!r} (expected {expected!r})")


def _image_header(obj: dict, where: str) -> tuple[str, int, int]:
    image_id = _field(obj, "image_id", str, where)
    width = _field(obj, "width", int, where)
    height = _field(obj, "height", int, where)
    if width <= 0 or height <= 0:
        raise ParseError(f"{where}: image size must be positive, got {width}x{height}")
    return image_id, width, height


def _parse_detection(obj: Any, where: str) -> tuple[str, float, Rect]:
    label = _field(obj, "class", str, where)
    score = float(_field(obj, "score", (int, float), where))
    bbox = _field(obj, "bbox", list, where)
    if len(bbox) != 4 or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in bbox):
        raise ParseError(f"{where}.bbox: expected [x, y, w, h] numbers, got {bbox!r}")
    if not all(math.isfinite(v) for v in bbox):
        raise ParseError(f"{where}.bbox: non-finite coordinate in {bbox!r}")
    if not 0.0 <= score <= 1.0:
        raise ParseError(f"{where}.score: {score!r} outside [0, 1]")
    x, y, w, h = bbox
    if w <= 0 or h <= 0:
        raise ParseError(f"{where}.bbox: zero or negative size {w}x{h}")
    return label, score, Rect(x, y, w, h)


def parse_detection_records(data: Any, source: str = "<memory>") -> list[ImageRecord]:
    """Parse ``vcm-det/1`` objects without any filtering or clipping."""
    records = []
    for suffix, obj in _objects(data, Path(source)):
        where = f"{source}{suffix}"
        _check_schema(obj, DET_SCHEMA, where)
        image_id, width, height = _image_header(obj, where)
        dets = []
        for j, raw in enumerate(_field(obj, "detections", list, where)):
            label, score, rect = _parse_detection(raw, f"{where}.detections[{j}]")
            dets.append(Detection(label, score, rect))
        records.append(ImageRecord(image_id, width, height, tuple(dets)))
    return records


def filter_record(record: ImageRecord, class_map: ClassMap, min_score: float = 0.0) -> ImageRecord:
    """Map labels, drop unmapped or low-score detections, clip boxes to the image.

    Boxes entirely outside the image are dropped with a warning.
    """
    kept = []
    for det in record.detections:
        target = class_map.lookup(det.class_label)
        if target is None or det.score < min_score:
            continue
        clipped = det.bbox.clip(record.width, record.height)
        if clipped.area <= 0:
            log.warning("%s: dropping %s box %s lying outside the image", record.image_id, det.class_label, det.bbox)
            continue
        kept.append(replace(det, class_label=target, bbox=clipped))
    return replace(record, detections=tuple(kept))


def load_detections(
    path: str | Path,
    class_map: ClassMap | None = None,
    min_score: float = 0.0,
) -> list[ImageRecord]:
    path = Path(path)
    class_map = class_map or ClassMap.cityscapes()
    records = parse_detection_records(_read_json(path), str(path))
    return [filter_record(r, class_map, min_score) for r in records]


def parse_instance_sets(data: Any, source: str = "<memory>", default_score: float | None = None) -> list[InstanceSet]:
    sets = []
    for suffix, obj in _objects(data, Path(source)):
        where = f"{source}{suffix}"
        _check_schema(obj, INST_SCHEMA, where)
        image_id, width, height = _image_header(obj, where)
        instances = []
        seen: set[int] = set()
        for j, raw in enumerate(_field(obj, "instances", list, where)):
            iwhere = f"{where}.instances[{j}]"
            inst_id = _field(raw, "id", int, iwhere)
            if inst_id in seen:
                raise IntegrityError(f"{iwhere}: duplicate instance id {inst_id} in image {image_id!r}")
            seen.add(inst_id)
            label = _field(raw, "class", str, iwhere)
            if "score" in raw or default_score is None:
                score = float(_field(raw, "score", (int, float), iwhere))
            else:
                score = default_score
            if not 0.0 <= score <= 1.0:
                raise ParseError(f"{iwhere}.score: {score!r} outside [0, 1]")
            runs = _field(raw, "rle", list, iwhere)
            if not all(isinstance(r, int) and not isinstance(r, bool) for r in runs):
                raise ParseError(f"{iwhere}.rle: run lengths must be integers")
            try:
                mask = InstanceMask(width, height, tuple(runs))
            except ValueError as exc:
                raise type(exc)(f"{iwhere}.rle: {exc}") from exc
            if mask.pixel_count == 0:
                raise ParseError(f"{iwhere}.rle: mask has no foreground pixels")
            instances.append(Instance(inst_id, label, score, mask))
        sets.append(InstanceSet(image_id, width, height, tuple(instances)))
    return sets


def load_ground_truth(path: str | Path) -> list[InstanceSet]:
    path = Path(path)
    return parse_instance_sets(_read_json(path), str(path), default_score=1.0)


def load_instances(path: str | Path) -> list[InstanceSet]:
    path = Path(path)
    return parse_instance_sets(_read_json(path), str(path))


def _by_image(items: Iterable, source: str) -> dict:
    out = {}
    for item in items:
        if item.image_id in out:
            raise IntegrityError(f"{source}: image {item.image_id!r} appears more than once")
        out[item.image_id] = item
    return out


def load_instance_dir(path: str | Path, ground_truth: bool = False) -> dict[str, InstanceSet]:
    """Load every ``*.json`` under ``path`` (or a single file) keyed by image id."""
    path = Path(path)
    files = sorted(path.glob("*.json")) if path.is_dir() else [path]
    loader = load_ground_truth if ground_truth else load_instances
    return _by_image((s for f in files for s in loader(f)), str(path))


def load_detection_dir(
    path: str | Path,
    class_map: ClassMap | None = None,
    min_score: float = 0.0,
) -> dict[str, ImageRecord]:
    path = Path(path)
    files = sorted(path.glob("*.json")) if path.is_dir() else [path]
    return _by_image((r for f in files for r in load_detections(f, class_map, min_score)), str(path))


def detection_record_to_dict(record: ImageRecord) -> dict:
    return {
        "schema": DET_SCHEMA,
        "image_id": record.image_id,
        "width": record.width,
        "height": record.height,
        "detections": [
            {"class": d.class_label, "score": d.score, "bbox": d.bbox.as_list()} for d in record.detections
        ],
    }
