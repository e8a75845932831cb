"""Small synthetic corpora for exercising the sweep without external tools.

Each image is textured background with a few textured elliptical objects
whose contrast is log-uniform in [4, 64] grey levels, so that some objects
degrade already at fine quantization and others only at coarse.  Two
detector sources are written:

``oracle``
    tight boxes around every ground-truth object.
``noisy``
    jittered boxes, roughly one object in four missed, one spurious box per
    image and an extra detection with a label outside the evaluation classes.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .codec import Image, write_image
from .geometry import Rect
from .ingest import DET_SCHEMA
from .masks import Instance, InstanceMask, InstanceSet

SYNTH_CLASSES = ("car", "person")


def synth_image(
    rng: np.random.Generator,
    image_id: str,
    width: int = 512,
    height: int = 384,
    n_objects: int = 6,
) -> tuple[Image, InstanceSet, list[Rect]]:
    """Return the image, its ground truth and one tight box per surviving object."""
    canvas = rng.normal(100.0, 12.0, (height, width))
    yy, xx = np.mgrid[0:height, 0:width]
    owner = np.zeros((height, width), dtype=np.int32)
    boxes: dict[int, Rect] = {}
    for i in range(1, n_objects + 1):
        rx, ry = (int(v) for v in rng.integers(8, 40, size=2))
        cx = int(rng.integers(rx + 1, width - rx - 1))
        cy = int(rng.integers(ry + 1, height - ry - 1))
        inside = ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 <= 1.0
        contrast = 2.0 ** rng.uniform(2.0, 6.0) * rng.choice([-1.0, 1.0])
        texture = rng.uniform(6.0, 14.0)
        canvas[inside] = rng.normal(100.0 + contrast, texture, int(inside.sum()))
        owner[inside] = i
        boxes[i] = Rect(cx - rx, cy - ry, 2 * rx + 1, 2 * ry + 1)

    instances = []
    kept_boxes = []
    for i in range(1, n_objects + 1):
        mask = owner == i
        # later objects may have painted over an earlier one entirely
        if not mask.any():
            continue
        ys, xs = np.nonzero(mask)
        label = SYNTH_CLASSES[(i - 1) % len(SYNTH_CLASSES)]
        instances.append(Instance(i, label, 1.0, InstanceMask.from_array(mask)))
        kept_boxes.append(Rect(int(xs.min()), int(ys.min()), int(xs.max() - xs.min() + 1), int(ys.max() - ys.min() + 1)))
    img = Image(np.clip(np.rint(canvas), 0, 255).astype(np.uint8))
    return img, InstanceSet(image_id, width, height, tuple(instances)), kept_boxes


def _det_file(image_id: str, width: int, height: int, dets: list[dict]) -> str:
    payload = {"schema": DET_SCHEMA, "image_id": image_id, "width": width, "height": height, "detections": dets}
    return json.dumps(payload, indent=1) + "\n"


def make_synthetic_corpus(
    out_dir: str | Path,
    n_images: int = 4,
    seed: int = 0,
    width: int = 512,
    height: int = 384,
    n_objects: int = 6,
) -> Path:
    """Write ``images/``, ``gt/`` and ``detections/{oracle,noisy}/`` under ``out_dir``."""
    out = Path(out_dir)
    for sub in ("images", "gt", "detections/oracle", "detections/noisy"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    for n in range(n_images):
        image_id = f"synth_{n:03d}"
        img, gt, boxes = synth_image(rng, image_id, width, height, n_objects)
        write_image(img, out / "images" / f"{image_id}.pgm")
        (out / "gt" / f"{image_id}.json").write_text(json.dumps(gt.to_dict()) + "\n", encoding="utf-8")

        oracle = [
            {"class": inst.class_label, "score": 1.0, "bbox": box.as_list()}
            for inst, box in zip(gt.instances, boxes)
        ]
        (out / "detections/oracle" / f"{image_id}.json").write_text(
            _det_file(image_id, width, height, oracle), encoding="utf-8"
        )

        noisy = []
        for inst, box in zip(gt.instances, boxes):
            if rng.random() < 0.25:
                continue
            dx, dy = (int(v) for v in rng.integers(-6, 7, size=2))
            noisy.append({
                "class": inst.class_label,
                "score": round(float(rng.uniform(0.3, 0.99)), 3),
                "bbox": [box.x + dx, box.y + dy, box.w, box.h],
            })
        sw, sh = (int(v) for v in rng.integers(16, 64, size=2))
        sx, sy = int(rng.integers(0, width - sw)), int(rng.integers(0, height - sh))
        noisy.append({"class": "car", "score": 0.2, "bbox": [sx, sy, sw, sh]})
        noisy.append({"class": "dog", "score": 0.9, "bbox": [sx, sy, sw, sh]})
        (out / "detections/noisy" / f"{image_id}.json").write_text(
            _det_file(image_id, width, height, noisy), encoding="utf-8"
        )
    return out
