"""Detection metrics: per-class and macro precision, recall, and average precision.

The pipeline mirrors the usual detector-benchmark recipe:

* greedy confidence-ordered matching of predictions to ground truth, class-wise,
  at a given IoU threshold;
* 101-point interpolated average precision per class, at IoU 0.5 and averaged
  over IoU 0.50..0.95 in steps of 0.05;
* single-operating-point precision/recall over all surviving predictions;
* an unweighted (macro) mean across classes for the overall row.

Everything here is a pure function of its inputs, iterates in a documented
deterministic order, and breaks ties by input position, so results are exactly
reproducible.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

from .boxes import ClassList, Detection, GroundTruthBox, iou, parse_predictions, parse_yolo_labels
from .errors import LeafAssistError

# IoU thresholds for the ranged AP column: 0.50, 0.55, ..., 0.95.
RANGE_THRESHOLDS = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))

# Recall anchors for interpolated AP: 0.00, 0.01, ..., 1.00.
RECALL_ANCHORS = tuple(i / 100 for i in range(101))


class DatasetLayoutError(LeafAssistError):
    """Prediction/ground-truth directories do not line up; message lists offenders."""


@dataclass(frozen=True)
class MatchedPrediction:
    """One prediction after matching: kept confidence, TP/FP flag, class."""

    confidence: float
    is_tp: bool
    class_id: int


@dataclass(frozen=True)
class ClassMetrics:
    class_name: str
    precision: float
    recall: float
    ap50: float
    ap50_95: float
    n_gt: int
    n_pred: int


@dataclass(frozen=True)
class EvalReport:
    classes: list[ClassMetrics]
    overall: ClassMetrics | None
    n_images: int
    n_instances: int


def round3(value: float) -> float:
    """Round to 3 decimals, half away from zero (table display convention)."""
    return float(Decimal(repr(value)).quantize(Decimal("0.001"), rounding=ROUND_HALF_UP))


def match_predictions(preds: list[Detection], gts: list[GroundTruthBox],
                      iou_threshold: float) -> list[MatchedPrediction]:
    """Greedy confidence-descending matching for one image.

    Each prediction is matched class-wise against the not-yet-consumed ground
    truth box with the highest IoU; it is a true positive iff that IoU reaches
    the threshold, and the box is then consumed. Ties (equal confidence, equal
    IoU) resolve to the earlier list index.
    """
    order = sorted(range(len(preds)), key=lambda i: (-preds[i].confidence, i))
    consumed = [False] * len(gts)
    matches = []
    for i in order:
        pred = preds[i]
        best_iou = 0.0
        best_gt = -1
        for j, gt in enumerate(gts):
            if consumed[j] or gt.class_id != pred.class_id:
                continue
            overlap = iou(pred.bbox, gt.bbox)
            if overlap > best_iou:
                best_iou = overlap
                best_gt = j
        is_tp = best_gt >= 0 and best_iou >= iou_threshold
        if is_tp:
            consumed[best_gt] = True
        matches.append(MatchedPrediction(pred.confidence, is_tp, pred.class_id))
    return matches


def average_precision(matches: list[MatchedPrediction], n_gt: int) -> float | None:
    """101-point interpolated AP for one class at one IoU threshold.

    AP is the mean over recall anchors r of the maximum precision among
    precision/recall points whose recall is at least r (0 when no point
    qualifies). Returns 0.0 when there is nothing to find but predictions
    exist, and None (excluded) when there is neither ground truth nor
    predictions.
    """
    if n_gt == 0:
        return 0.0 if matches else None
    ordered = sorted(matches, key=lambda m: -m.confidence)
    points = []  # (recall, precision) at each prefix of the ranked predictions
    tp = 0
    for k, match in enumerate(ordered, start=1):
        if match.is_tp:
            tp += 1
        points.append((tp / n_gt, tp / k))
    total = 0.0
    for anchor in RECALL_ANCHORS:
        best = 0.0
        for recall, precision in points:
            if recall >= anchor and precision > best:
                best = precision
        total += best
    return total / len(RECALL_ANCHORS)


def ap_over_range(matches_by_threshold: dict[float, list[MatchedPrediction]],
                  n_gt: int) -> float | None:
    """Unweighted mean of AP over the 0.50:0.95 threshold range.

    ``matches_by_threshold`` must carry one match list per RANGE_THRESHOLDS
    entry. None (excluded) when every per-threshold AP is undefined.
    """
    values = []
    for threshold in RANGE_THRESHOLDS:
        ap = average_precision(matches_by_threshold[threshold], n_gt)
        if ap is None:
            return None
        values.append(ap)
    return math.fsum(values) / len(values)


def precision_recall_at(matches: list[MatchedPrediction],
                        n_gt: int) -> tuple[float, float]:
    """Operating-point precision and recall over all given predictions."""
    tp = sum(1 for m in matches if m.is_tp)
    precision = tp / len(matches) if matches else 0.0
    recall = tp / n_gt if n_gt else 0.0
    return precision, recall


def aggregate_overall(rows: list[ClassMetrics]) -> ClassMetrics:
    """Macro (unweighted) mean of the class rows; counts are summed."""
    if not rows:
        raise ValueError("cannot aggregate an empty list of class rows")

    def mean(values):
        return math.fsum(values) / len(values)

    return ClassMetrics(
        class_name="overall",
        precision=mean([r.precision for r in rows]),
        recall=mean([r.recall for r in rows]),
        ap50=mean([r.ap50 for r in rows]),
        ap50_95=mean([r.ap50_95 for r in rows]),
        n_gt=sum(r.n_gt for r in rows),
        n_pred=sum(r.n_pred for r in rows),
    )


def load_size_manifest(path) -> dict[str, tuple[int, int]]:
    """Read a ``filename,width,height`` CSV into a stem -> (w, h) mapping."""
    sizes = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().lower() == "filename":
                continue
            name, width, height = row[0].strip(), int(row[1]), int(row[2])
            sizes[Path(name).stem] = (width, height)
    return sizes


def sizes_from_images(images_dir) -> dict[str, tuple[int, int]]:
    """Read image dimensions straight from an image directory."""
    from .detectors import decode_image_size

    sizes = {}
    for path in sorted(Path(images_dir).iterdir()):
        if path.suffix.lower() in (".jpg", ".jpeg", ".png"):
            sizes[path.stem] = decode_image_size(path.read_bytes())
    return sizes


def evaluate_dataset(pred_dir, gt_dir, classes: ClassList,
                     image_sizes: dict[str, tuple[int, int]]) -> EvalReport:
    """Evaluate a prediction directory against a ground-truth directory.

    Ground-truth files define the image set; a missing prediction file counts
    as zero predictions for that image, while a prediction file without a
    ground-truth counterpart is an error (it would silently skew precision).
    Classes that have neither ground truth nor predictions anywhere in the
    dataset are excluded from the report.
    """
    pred_dir, gt_dir = Path(pred_dir), Path(gt_dir)
    if not gt_dir.is_dir():
        raise DatasetLayoutError(f"ground-truth directory not readable: {gt_dir}")
    if not pred_dir.is_dir():
        raise DatasetLayoutError(f"prediction directory not readable: {pred_dir}")

    gt_files = sorted(gt_dir.glob("*.txt"))
    gt_stems = {p.stem for p in gt_files}
    orphans = sorted(p.name for p in pred_dir.glob("*.txt") if p.stem not in gt_stems)
    if orphans:
        raise DatasetLayoutError(
            "prediction files without ground-truth counterpart: " + ", ".join(orphans))
    missing_sizes = sorted(p.stem for p in gt_files if p.stem not in image_sizes)
    if missing_sizes:
        raise DatasetLayoutError(
            "no image size known for: " + ", ".join(missing_sizes))

    # Pool matches per class and per threshold across images, in sorted-stem
    # order so confidence ties keep a reproducible order.
    pooled: dict[tuple[int, float], list[MatchedPrediction]] = {}
    n_gt_by_class = {cid: 0 for cid in range(len(classes))}
    n_pred_by_class = {cid: 0 for cid in range(len(classes))}
    n_instances = 0

    for gt_file in gt_files:
        width, height = image_sizes[gt_file.stem]
        gts = parse_yolo_labels(gt_file.read_text(encoding="utf-8"),
                                width, height, classes)
        pred_file = pred_dir / gt_file.name
        if pred_file.is_file():
            preds = parse_predictions(pred_file.read_text(encoding="utf-8"),
                                      width, height, classes)
        else:
            preds = []
        n_instances += len(gts)
        for gt in gts:
            n_gt_by_class[gt.class_id] += 1
        for pred in preds:
            n_pred_by_class[pred.class_id] += 1
        for threshold in RANGE_THRESHOLDS:
            for match in match_predictions(preds, gts, threshold):
                pooled.setdefault((match.class_id, threshold), []).append(match)

    rows = []
    for class_id, class_name in enumerate(classes):
        n_gt = n_gt_by_class[class_id]
        n_pred = n_pred_by_class[class_id]
        if n_gt == 0 and n_pred == 0:
            continue
        by_threshold = {
            t: sorted(pooled.get((class_id, t), []), key=lambda m: -m.confidence)
            for t in RANGE_THRESHOLDS
        }
        matches50 = by_threshold[RANGE_THRESHOLDS[0]]
        precision, recall = precision_recall_at(matches50, n_gt)
        ap50 = average_precision(matches50, n_gt)
        ap50_95 = ap_over_range(by_threshold, n_gt)
        rows.append(ClassMetrics(class_name, precision, recall,
                                 ap50, ap50_95, n_gt, n_pred))

    overall = aggregate_overall(rows) if rows else None
    return EvalReport(rows, overall, n_images=len(gt_files), n_instances=n_instances)


def report_to_dict(report: EvalReport) -> dict:
    def row(metrics: ClassMetrics) -> dict:
        return {
            "class_name": metrics.class_name,
            "precision": metrics.precision,
            "recall": metrics.recall,
            "ap50": metrics.ap50,
            "ap50_95": metrics.ap50_95,
            "n_gt": metrics.n_gt,
            "n_pred": metrics.n_pred,
        }

    return {
        "classes": [row(r) for r in report.classes],
        "overall": row(report.overall) if report.overall else None,
        "n_images": report.n_images,
        "n_instances": report.n_instances,
    }


def report_to_json(report: EvalReport) -> str:
    return json.dumps(report_to_dict(report), indent=2) + "\n"


def render_table(report: EvalReport) -> str:
    """Fixed-width text table with 3-decimal display rounding."""
    header = f"{'Class':<12} {'Precision':>9} {'Recall':>9} {'mAP@0.5':>9} {'mAP@0.5:0.95':>13} {'GT':>5} {'Pred':>5}"
    lines = [header, "-" * len(header)]
    for row in list(report.classes) + ([report.overall] if report.overall else []):
        lines.append(
            f"{row.class_name:<12} {round3(row.precision):>9.3f} {round3(row.recall):>9.3f} "
            f"{round3(row.ap50):>9.3f} {round3(row.ap50_95):>13.3f} {row.n_gt:>5} {row.n_pred:>5}")
    lines.append(f"{report.n_images} images, {report.n_instances} annotated instances")
    return "\n".join(lines)
