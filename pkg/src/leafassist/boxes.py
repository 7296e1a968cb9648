"""Detection geometry and YOLO-format label parsing.

Boxes are axis-aligned, in pixel coordinates with a top-left origin, and kept
as floats: truncating to integers would quietly move boxes on 640x640 resized
inputs and change every downstream metric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ParseError

DEFAULT_CLASSES = ("cercospora", "miner", "phoma", "rust")


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box, ``x1 <= x2`` and ``y1 <= y2``."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        for v in (self.x1, self.y1, self.x2, self.y2):
            if not math.isfinite(v):
                raise ValueError(f"box coordinates must be finite, got {self!r}")
        if self.x2 < self.x1 or self.y2 < self.y1:
            raise ValueError(f"box corners out of order: {self!r}")

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)


@dataclass(frozen=True)
class Detection:
    """One predicted box with its class and confidence score."""

    class_id: int
    class_name: str
    bbox: BBox
    confidence: float

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")


@dataclass(frozen=True)
class GroundTruthBox:
    """One annotated box."""

    class_id: int
    bbox: BBox


class ClassList:
    """Ordered, unique, non-empty class names; maps ids to names."""

    def __init__(self, names=DEFAULT_CLASSES):
        names = list(names)
        if not names:
            raise ValueError("class list must not be empty")
        if any(not n for n in names):
            raise ValueError("class names must be non-empty")
        if len(set(names)) != len(names):
            raise ValueError(f"class names must be unique, got {names}")
        self.names = names

    def __len__(self) -> int:
        return len(self.names)

    def __iter__(self):
        return iter(self.names)

    def __eq__(self, other) -> bool:
        return isinstance(other, ClassList) and self.names == other.names

    def name_of(self, class_id: int) -> str:
        if not 0 <= class_id < len(self.names):
            raise ValueError(f"class_id {class_id} outside 0..{len(self.names) - 1}")
        return self.names[class_id]


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union of two boxes; 0.0 when disjoint or degenerate."""
    ix = min(a.x2, b.x2) - max(a.x1, b.x1)
    iy = min(a.y2, b.y2) - max(a.y1, b.y1)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return inter / union


def _parse_fields(line: str, line_no: int, n_fields: int) -> list[float]:
    fields = line.split()
    if len(fields) != n_fields:
        raise ParseError(f"expected {n_fields} fields, got {len(fields)}", line_no)
    try:
        return [float(f) for f in fields]
    except ValueError:
        raise ParseError(f"non-numeric field in {fields!r}", line_no) from None


def _denormalize(xc: float, yc: float, w: float, h: float,
                 image_w: float, image_h: float) -> BBox:
    half_w = w * image_w / 2.0
    half_h = h * image_h / 2.0
    cx = xc * image_w
    cy = yc * image_h
    return BBox(cx - half_w, cy - half_h, cx + half_w, cy + half_h)


def normalize_bbox(bbox: BBox, image_w: float, image_h: float):
    """Inverse of denormalization: pixel box back to `(xc, yc, w, h)` fractions."""
    xc = (bbox.x1 + bbox.x2) / 2.0 / image_w
    yc = (bbox.y1 + bbox.y2) / 2.0 / image_h
    w = (bbox.x2 - bbox.x1) / image_w
    h = (bbox.y2 - bbox.y1) / image_h
    return xc, yc, w, h


def _check_class_id(value: float, classes: ClassList, line_no: int) -> int:
    class_id = int(value)
    if class_id != value:
        raise ParseError(f"class id must be an integer, got {value}", line_no)
    if not 0 <= class_id < len(classes):
        raise ParseError(
            f"class id {class_id} outside 0..{len(classes) - 1}", line_no)
    return class_id


def parse_yolo_labels(text: str, image_w: float, image_h: float,
                      classes: ClassList) -> list[GroundTruthBox]:
    """Parse ground-truth lines ``class xc yc w h`` (normalized) into pixel boxes.

    Line order is preserved; blank lines are skipped. Any malformed line raises
    :class:`ParseError` naming its 1-based line number.
    """
    boxes = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        cid, xc, yc, w, h = _parse_fields(line, line_no, 5)
        class_id = _check_class_id(cid, classes, line_no)
        boxes.append(GroundTruthBox(class_id, _denormalize(xc, yc, w, h, image_w, image_h)))
    return boxes


def parse_predictions(text: str, image_w: float, image_h: float,
                      classes: ClassList) -> list[Detection]:
    """Parse prediction lines ``class xc yc w h conf`` into :class:`Detection`s."""
    dets = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        cid, xc, yc, w, h, conf = _parse_fields(line, line_no, 6)
        class_id = _check_class_id(cid, classes, line_no)
        if not 0.0 <= conf <= 1.0:
            raise ParseError(f"confidence {conf} outside [0, 1]", line_no)
        dets.append(Detection(class_id, classes.name_of(class_id),
                              _denormalize(xc, yc, w, h, image_w, image_h), conf))
    return dets


def serialize_yolo_labels(boxes: list[GroundTruthBox], image_w: float,
                          image_h: float) -> str:
    """Render ground-truth boxes back to normalized label lines (LF endings)."""
    lines = []
    for box in boxes:
        xc, yc, w, h = normalize_bbox(box.bbox, image_w, image_h)
        lines.append(f"{box.class_id} {xc!r} {yc!r} {w!r} {h!r}")
    return "\n".join(lines) + ("\n" if lines else "")


def serialize_predictions(dets: list[Detection], image_w: float,
                          image_h: float) -> str:
    """Render detections back to normalized prediction lines (LF endings)."""
    lines = []
    for det in dets:
        xc, yc, w, h = normalize_bbox(det.bbox, image_w, image_h)
        lines.append(f"{det.class_id} {xc!r} {yc!r} {w!r} {h!r} {det.confidence!r}")
    return "\n".join(lines) + ("\n" if lines else "")


def filter_and_nms(dets: list[Detection], conf_threshold: float = 0.25,
                   iou_threshold: float = 0.45) -> list[Detection]:
    """Drop low-confidence detections, then greedy per-class non-maximum suppression.

    Within each class, boxes are visited in descending confidence (ties keep
    input order) and a box is suppressed when its IoU with an already-kept box
    of the same class exceeds ``iou_threshold``. Suppression never crosses
    classes. The result is sorted by descending confidence, ties by input order.
    """
    if not 0.0 <= conf_threshold <= 1.0:
        raise ValueError(f"conf_threshold must be in [0, 1], got {conf_threshold}")
    if not 0.0 <= iou_threshold <= 1.0:
        raise ValueError(f"iou_threshold must be in [0, 1], got {iou_threshold}")

    survivors = [(i, d) for i, d in enumerate(dets) if d.confidence >= conf_threshold]
    survivors.sort(key=lambda pair: (-pair[1].confidence, pair[0]))

    kept: list[Detection] = []
    kept_by_class: dict[int, list[Detection]] = {}
    for _, det in survivors:
        same_class = kept_by_class.setdefault(det.class_id, [])
        if any(iou(det.bbox, other.bbox) > iou_threshold for other in same_class):
            continue
        same_class.append(det)
        kept.append(det)
    return kept
