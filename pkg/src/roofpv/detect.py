"""Bounding-box post-processing and detector evaluation.

Implements IoU, class-specific greedy NMS, greedy detection-to-truth
matching, and a COCO-style AP/AR report (101-point interpolated precision,
IoU thresholds 0.50:0.05:0.95, small/medium/large area buckets at the 32^2
and 96^2 pixel cutoffs, max-detection caps of 1/10/100).

Evaluation protocol
-------------------
Matching runs per image and class with detections in descending score
order (ties kept in input order): each detection takes the unmatched
ground-truth box of its class with the highest IoU, provided that IoU
meets the threshold. Area buckets restrict the ground truth only;
detections matched to an out-of-bucket truth box are ignored rather than
counted as false positives, while unmatched detections always count as
false positives. Corpus-level precision/recall accumulates detections
sorted by (score desc, image_id, input index).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np


class BoxClass(str, Enum):
    ROOF = "roof"
    PV = "pv"


# Post-detection suppression cutoffs: 0.2 for roofs, 0.1 for panels.
DEFAULT_NMS_THRESHOLDS = {BoxClass.ROOF: 0.2, BoxClass.PV: 0.1}
DEFAULT_IOU_THRESHOLDS = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))
DEFAULT_AREA_RANGES = {
    "all": (0.0, math.inf),
    "small": (0.0, 32.0**2),
    "medium": (32.0**2, 96.0**2),
    "large": (96.0**2, math.inf),
}
DEFAULT_MAX_DETS = (1, 10, 100)
MATCH_IOU_MIN = 0.5


def _check_box(xmin, ymin, xmax, ymax):
    if not (xmax > xmin and ymax > ymin):
        raise ValueError(f"invalid box ({xmin}, {ymin}, {xmax}, {ymax})")


@dataclass(frozen=True)
class BBox:
    """Scored class-tagged detection rectangle in pixel coordinates."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float
    cls: BoxClass
    score: float

    def __post_init__(self):
        _check_box(self.xmin, self.ymin, self.xmax, self.ymax)
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score {self.score} outside [0, 1]")

    @property
    def area(self) -> float:
        return (self.xmax - self.xmin) * (self.ymax - self.ymin)


@dataclass(frozen=True)
class GroundTruthBox:
    """Annotated truth rectangle in pixel coordinates."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float
    cls: BoxClass

    def __post_init__(self):
        _check_box(self.xmin, self.ymin, self.xmax, self.ymax)

    @property
    def area(self) -> float:
        return (self.xmax - self.xmin) * (self.ymax - self.ymin)


@dataclass
class DetectionSet:
    """Detections for one image."""

    image_id: str
    boxes: list[BBox] = field(default_factory=list)

    def __post_init__(self):
        if not self.image_id:
            raise ValueError("image_id must be nonempty")


@dataclass(frozen=True)
class EvalConfig:
    iou_thresholds: tuple[float, ...] = DEFAULT_IOU_THRESHOLDS
    area_ranges: tuple[tuple[str, tuple[float, float]], ...] = tuple(DEFAULT_AREA_RANGES.items())
    max_dets: tuple[int, ...] = DEFAULT_MAX_DETS

    def __post_init__(self):
        thrs = self.iou_thresholds
        if not thrs or any(t <= 0 or t > 1 for t in thrs):
            raise ValueError("iou thresholds must lie in (0, 1]")
        if any(b <= a for a, b in zip(thrs, thrs[1:])):
            raise ValueError("iou thresholds must be strictly increasing")

    @property
    def iou_range_label(self) -> str:
        return f"{self.iou_thresholds[0]:0.2f}:{self.iou_thresholds[-1]:0.2f}"


def iou(a, b) -> float:
    """Intersection area over union area of two rectangles (continuous)."""
    ix = max(0.0, min(a.xmax, b.xmax) - max(a.xmin, b.xmin))
    iy = max(0.0, min(a.ymax, b.ymax) - max(a.ymin, b.ymin))
    inter = ix * iy
    if inter <= 0.0:
        return 0.0
    union = a.area + b.area - inter
    return inter / union


def nms(dets: DetectionSet, thresholds=None) -> DetectionSet:
    """Greedy per-class non-maximum suppression.

    Boxes are visited in descending score order (ties in input order); a box
    is kept unless it overlaps an already-kept box of the same class with
    IoU strictly above that class's threshold. Kept boxes come out in visit
    order.
    """
    thresholds = dict(DEFAULT_NMS_THRESHOLDS if thresholds is None else thresholds)
    for cls, thr in thresholds.items():
        if not 0.0 <= thr <= 1.0:
            raise ValueError(f"NMS threshold {thr} for {cls} outside [0, 1]")
    order = sorted(range(len(dets.boxes)), key=lambda i: (-dets.boxes[i].score, i))
    kept: list[int] = []
    for i in order:
        box = dets.boxes[i]
        thr = thresholds.get(box.cls, 1.0)
        if all(
            dets.boxes[j].cls is not box.cls or iou(box, dets.boxes[j]) <= thr for j in kept
        ):
            kept.append(i)
    return DetectionSet(dets.image_id, [dets.boxes[i] for i in kept])


@dataclass(frozen=True)
class DetectionMatch:
    det_index: int
    matched_gt: int | None  # index into the ground-truth list, None for FP


@dataclass
class MatchResult:
    matches: list[DetectionMatch]
    unmatched_gt: int


def match_detections(dets: DetectionSet, gts: list[GroundTruthBox], iou_thr: float) -> MatchResult:
    """Greedy one-to-one matching of detections to ground truth.

    Detections are taken in descending score order; each claims the
    unmatched same-class truth box with the highest IoU when that IoU
    reaches ``iou_thr`` (equal IoUs resolve to the lowest truth index).
    """
    order = sorted(range(len(dets.boxes)), key=lambda i: (-dets.boxes[i].score, i))
    taken: set[int] = set()
    matches: list[DetectionMatch] = []
    for i in order:
        box = dets.boxes[i]
        best_j, best_iou = None, 0.0
        for j, gt in enumerate(gts):
            if j in taken or gt.cls is not box.cls:
                continue
            v = iou(box, gt)
            if v > best_iou:
                best_j, best_iou = j, v
        if best_j is not None and best_iou >= iou_thr:
            taken.add(best_j)
            matches.append(DetectionMatch(i, best_j))
        else:
            matches.append(DetectionMatch(i, None))
    matches.sort(key=lambda m: m.det_index)
    return MatchResult(matches, len(gts) - len(taken))


_RECALL_GRID = np.linspace(0.0, 1.0, 101)


def _interpolated_ap(tp_flags: np.ndarray, n_gt: int) -> float:
    """101-point interpolated AP from corpus-ordered TP/FP flags."""
    if n_gt == 0:
        return -1.0
    if tp_flags.size == 0:
        return 0.0
    tp = np.cumsum(tp_flags)
    fp = np.cumsum(~tp_flags)
    recall = tp / n_gt
    precision = tp / np.maximum(tp + fp, 1)
    # Precision envelope: best precision at any recall >= r.
    for i in range(precision.size - 1, 0, -1):
        precision[i - 1] = max(precision[i - 1], precision[i])
    idx = np.searchsorted(recall, _RECALL_GRID, side="left")
    sampled = np.where(idx < precision.size, precision[np.minimum(idx, precision.size - 1)], 0.0)
    return float(sampled.mean())


def average_precision(scored_flags, n_gt: int) -> float:
    """AP over a corpus of detections.

    ``scored_flags`` holds (score, image_id, input_index, is_tp) tuples from
    per-image matching at one IoU threshold; detections are pooled and
    sorted by (score desc, image_id, input index). Returns -1 when the
    class has no ground truth.
    """
    if n_gt == 0:
        return -1.0
    rows = sorted(scored_flags, key=lambda r: (-r[0], r[1], r[2]))
    flags = np.array([bool(r[3]) for r in rows], dtype=bool)
    return _interpolated_ap(flags, n_gt)


@dataclass
class EvalReport:
    """AP/AR grid plus per-class AP at the base matching threshold.

    ``cells`` maps (metric, iou label, area bucket, max_dets) to a value in
    [0, 1], or -1 where the bucket holds no ground truth.
    """

    cells: dict[tuple[str, str, str, int], float]
    per_class_ap50: dict[str, float]
    mean_ap50: float
    config: EvalConfig

    def coco_summary_lines(self) -> list[str]:
        rng = self.config.iou_range_label
        md = max(self.config.max_dets)
        rows = [
            ("Average Precision", "(AP)", rng, "all", md),
            ("Average Precision", "(AP)", "0.50", "all", md),
            ("Average Precision", "(AP)", "0.75", "all", md),
            ("Average Precision", "(AP)", rng, "small", md),
            ("Average Precision", "(AP)", rng, "medium", md),
            ("Average Precision", "(AP)", rng, "large", md),
            ("Average Recall", "(AR)", rng, "all", self.config.max_dets[0]),
            ("Average Recall", "(AR)", rng, "all", self.config.max_dets[1]),
            ("Average Recall", "(AR)", rng, "all", self.config.max_dets[2]),
            ("Average Recall", "(AR)", rng, "small", md),
            ("Average Recall", "(AR)", rng, "medium", md),
            ("Average Recall", "(AR)", rng, "large", md),
        ]
        lines = []
        for title, kind, iou_label, area, max_d in rows:
            metric = "AP" if kind == "(AP)" else "AR"
            value = self.cells[(metric, iou_label, area, max_d)]
            lines.append(
                " {:<18} {} @[ IoU={:<9} | area={:>6s} | maxDets={:>3d} ] = {:0.3f}".format(
                    title, kind, iou_label, area, max_d, value
                )
            )
        return lines

    def coco_text(self) -> str:
        return "\n".join(["IoU metric: bbox"] + self.coco_summary_lines()) + "\n"

    def csv_rows(self) -> list[dict]:
        rows = []
        for (metric, iou_label, area, max_d), value in sorted(self.cells.items()):
            rows.append(
                {
                    "metric": metric,
                    "iou": iou_label,
                    "area": area,
                    "max_dets": max_d,
                    "class": "mean",
                    "value": value,
                }
            )
        for cls in sorted(self.per_class_ap50):
            rows.append(
                {
                    "metric": "AP",
                    "iou": "0.50",
                    "area": "all",
                    "max_dets": max(self.config.max_dets),
                    "class": cls,
                    "value": self.per_class_ap50[cls],
                }
            )
        return rows


def _per_image_inputs(detections, ground_truth):
    if not detections and not ground_truth:
        raise ValueError("empty corpus: no detections and no ground truth")
    det_map: dict[str, DetectionSet] = {}
    for ds in detections:
        if ds.image_id in det_map:
            raise ValueError(f"duplicate detections for image {ds.image_id}")
        det_map[ds.image_id] = ds
    missing = set(det_map) - set(ground_truth)
    if missing:
        raise ValueError(f"detections reference images without ground truth: {sorted(missing)}")
    return det_map


def eval_report(
    detections: list[DetectionSet],
    ground_truth: dict[str, list[GroundTruthBox]],
    config: EvalConfig | None = None,
) -> EvalReport:
    """Full AP/AR grid over a corpus of images.

    AP cells average 101-point APs per class over the classes that have
    ground truth in the bucket; empty buckets report -1. AR is the mean of
    the maximum recall achieved at each IoU threshold under the per-image
    detection cap.
    """
    config = config or EvalConfig()
    det_map = _per_image_inputs(detections, ground_truth)
    image_ids = sorted(ground_truth)
    classes = [BoxClass.ROOF, BoxClass.PV]
    area_ranges = dict(config.area_ranges)
    rng_label = config.iou_range_label
    max_cap = max(config.max_dets)

    # Per (class, image): detections sorted by (score desc, input index),
    # ground-truth list, and their IoU matrix.
    per_img: dict[tuple[str, str], tuple[list, list]] = {}
    for img in image_ids:
        gts = ground_truth[img]
        dset = det_map.get(img)
        boxes = dset.boxes if dset else []
        for cls in classes:
            dts = [b for i, b in sorted(enumerate(boxes), key=lambda t: (-t[1].score, t[0])) if b.cls is cls]
            gtc = [g for g in gts if g.cls is cls]
            per_img[(cls.value, img)] = (dts, gtc)

    def greedy(dts, gtc, thr, cap):
        """Matched gt index per detection (or None), detections capped."""
        taken: set[int] = set()
        out = []
        for box in dts[:cap]:
            best_j, best_iou = None, 0.0
            for j, gt in enumerate(gtc):
                if j in taken:
                    continue
                v = iou(box, gt)
                if v > best_iou:
                    best_j, best_iou = j, v
            if best_j is not None and best_iou >= thr:
                taken.add(best_j)
                out.append(best_j)
            else:
                out.append(None)
        return out

    def in_bucket(gt, bucket):
        lo, hi = area_ranges[bucket]
        return lo <= gt.area < hi

    # AP per (class, threshold, bucket, cap) and recall per same key.
    ap_val: dict[tuple[str, float, str, int], float] = {}
    rec_val: dict[tuple[str, float, str, int], float] = {}
    for cls in classes:
        for thr in config.iou_thresholds:
            for cap in config.max_dets:
                match_by_img = {
                    img: greedy(*per_img[(cls.value, img)], thr, cap) for img in image_ids
                }
                for bucket in area_ranges:
                    pooled = []
                    matched_in_bucket = 0
                    n_gt = 0
                    for img in image_ids:
                        dts, gtc = per_img[(cls.value, img)]
                        n_gt += sum(1 for g in gtc if in_bucket(g, bucket))
                        for idx, gj in enumerate(match_by_img[img]):
                            if gj is None:
                                pooled.append((dts[idx].score, img, idx, False))
                            elif in_bucket(gtc[gj], bucket):
                                pooled.append((dts[idx].score, img, idx, True))
                                matched_in_bucket += 1
                            # matched to out-of-bucket truth: ignored
                    key = (cls.value, thr, bucket, cap)
                    ap_val[key] = average_precision(pooled, n_gt)
                    rec_val[key] = (matched_in_bucket / n_gt) if n_gt else -1.0

    def mean_over_classes(values):
        defined = [v for v in values if v != -1.0]
        return float(np.mean(defined)) if defined else -1.0

    def ap_cell(iou_label, bucket, cap):
        per_class = []
        for cls in classes:
            if iou_label == rng_label:
                vals = [ap_val[(cls.value, t, bucket, cap)] for t in config.iou_thresholds]
                defined = [v for v in vals if v != -1.0]
                per_class.append(float(np.mean(defined)) if defined else -1.0)
            else:
                per_class.append(ap_val[(cls.value, float(iou_label), bucket, cap)])
        return mean_over_classes(per_class)

    def ar_cell(bucket, cap):
        per_class = []
        for cls in classes:
            vals = [rec_val[(cls.value, t, bucket, cap)] for t in config.iou_thresholds]
            defined = [v for v in vals if v != -1.0]
            per_class.append(float(np.mean(defined)) if defined else -1.0)
        return mean_over_classes(per_class)

    cells: dict[tuple[str, str, str, int], float] = {}
    cells[("AP", rng_label, "all", max_cap)] = ap_cell(rng_label, "all", max_cap)
    for pt in (0.50, 0.75):
        if pt in config.iou_thresholds:
            cells[("AP", f"{pt:0.2f}", "all", max_cap)] = ap_cell(f"{pt:0.2f}", "all", max_cap)
    for bucket in ("small", "medium", "large"):
        if bucket in area_ranges:
            cells[("AP", rng_label, bucket, max_cap)] = ap_cell(rng_label, bucket, max_cap)
    for cap in config.max_dets:
        cells[("AR", rng_label, "all", cap)] = ar_cell("all", cap)
    for bucket in ("small", "medium", "large"):
        if bucket in area_ranges:
            cells[("AR", rng_label, bucket, max_cap)] = ar_cell(bucket, max_cap)

    per_class_ap50 = {}
    if 0.50 in config.iou_thresholds:
        for cls in classes:
            per_class_ap50[cls.value] = ap_val[(cls.value, 0.50, "all", max_cap)]
    defined = [v for v in per_class_ap50.values() if v != -1.0]
    mean_ap50 = float(np.mean(defined)) if defined else -1.0
    return EvalReport(cells, per_class_ap50, mean_ap50, config)


# ---------------------------------------------------------------------------
# JSON-lines interchange: one object per box with fields image_id, class
# ("roof"|"pv"), score (absent for ground truth), bbox [xmin, ymin, xmax, ymax].

def write_detections_jsonl(path, sets: list[DetectionSet]) -> None:
    with open(path, "w") as fh:
        for ds in sets:
            for box in ds.boxes:
                fh.write(
                    json.dumps(
                        {
                            "image_id": ds.image_id,
                            "class": box.cls.value,
                            "score": box.score,
                            "bbox": [box.xmin, box.ymin, box.xmax, box.ymax],
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )


def read_detections_jsonl(path) -> list[DetectionSet]:
    by_image: dict[str, DetectionSet] = {}
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        box = BBox(*rec["bbox"], cls=BoxClass(rec["class"]), score=rec["score"])
        by_image.setdefault(rec["image_id"], DetectionSet(rec["image_id"])).boxes.append(box)
    return list(by_image.values())


def write_groundtruth_jsonl(path, gts: dict[str, list[GroundTruthBox]]) -> None:
    with open(path, "w") as fh:
        for image_id in gts:
            for box in gts[image_id]:
                fh.write(
                    json.dumps(
                        {
                            "image_id": image_id,
                            "class": box.cls.value,
                            "bbox": [box.xmin, box.ymin, box.xmax, box.ymax],
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )


def read_groundtruth_jsonl(path) -> dict[str, list[GroundTruthBox]]:
    gts: dict[str, list[GroundTruthBox]] = {}
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        gts.setdefault(rec["image_id"], []).append(
            GroundTruthBox(*rec["bbox"], cls=BoxClass(rec["class"]))
        )
    return gts
