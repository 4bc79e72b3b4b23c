"""Block-group deployment measures from per-image detections.

Two measures per block group: PV systems per household (system counts
summed over the block group's images, divided once by the household count)
and the PV-to-roof area ratio (ratio of summed PV area to summed roof
area). Panels detected on an image with no roof detections are excluded,
which keeps ground-mounted arrays out of the rooftop measures.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

from .detect import BBox, BoxClass, DetectionSet, nms


@dataclass(frozen=True)
class ImageObservation:
    """Post-NMS detections for one image, tagged with its block group."""

    image_id: str
    block_group_id: str
    roof_boxes: tuple[BBox, ...]
    pv_boxes: tuple[BBox, ...]
    gsd_m_per_px: float

    def __post_init__(self):
        if self.gsd_m_per_px <= 0:
            raise ValueError(f"gsd {self.gsd_m_per_px} must be positive")
        if any(b.cls is not BoxClass.ROOF for b in self.roof_boxes):
            raise ValueError("roof_boxes must contain only roof-class boxes")
        if any(b.cls is not BoxClass.PV for b in self.pv_boxes):
            raise ValueError("pv_boxes must contain only pv-class boxes")


@dataclass(frozen=True)
class ImageContribution:
    pv_count: int
    pv_area_m2: float
    roof_area_m2: float


@dataclass(frozen=True)
class BlockGroupDeployment:
    """One block group's deployment record."""

    block_group_id: str
    pv_system_count: int
    households: int
    pv_area_m2: float
    roof_area_m2: float
    pv_count_per_hh: float
    pv_to_roof_ratio: float | None  # None when no roof area was detected


@dataclass(frozen=True)
class RollupIssue:
    block_group_id: str
    reason: str


class _DisjointSet:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, i):
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def merge_pv_systems(pv_boxes, eps_px: float = 0.0) -> int:
    """Number of PV systems after merging touching panels.

    Boxes whose boundaries, expanded by ``eps_px`` on every side,
    intersect are treated as panels of one system (union/find over the
    overlap graph).
    """
    n = len(pv_boxes)
    if n == 0:
        return 0
    ds = _DisjointSet(n)
    for i in range(n):
        a = pv_boxes[i]
        for j in range(i + 1, n):
            b = pv_boxes[j]
            if (
                a.xmin - eps_px <= b.xmax + eps_px
                and b.xmin - eps_px <= a.xmax + eps_px
                and a.ymin - eps_px <= b.ymax + eps_px
                and b.ymin - eps_px <= a.ymax + eps_px
            ):
                ds.union(i, j)
    return len({ds.find(i) for i in range(n)})


def image_contribution(obs: ImageObservation, merge_eps: float | None = None) -> ImageContribution:
    """Counts and areas one image adds to its block group.

    Without roof detections the image contributes nothing: panels seen on
    roofless images are dropped. By default every post-NMS PV box counts as
    one system; pass ``merge_eps`` to merge boxes whose eps-expanded
    boundaries intersect into single systems.
    """
    if not obs.roof_boxes:
        return ImageContribution(0, 0.0, 0.0)
    scale = obs.gsd_m_per_px**2
    roof_area = sum(b.area for b in obs.roof_boxes) * scale
    pv_area = sum(b.area for b in obs.pv_boxes) * scale
    if merge_eps is None:
        pv_count = len(obs.pv_boxes)
    else:
        pv_count = merge_pv_systems(obs.pv_boxes, merge_eps)
    return ImageContribution(pv_count, pv_area, roof_area)


def pv_count_per_hh(contributions, households: int) -> float:
    """Summed PV system count divided by the block group's household count."""
    if households <= 0:
        raise ValueError(f"households {households} must be positive")
    return sum(c.pv_count for c in contributions) / households


def pv_to_roof_ratio(contributions) -> float:
    """Summed PV area over summed roof area across a block group's images."""
    total_roof = sum(c.roof_area_m2 for c in contributions)
    if total_roof <= 0:
        raise ValueError("total roof area is zero; ratio undefined")
    return sum(c.pv_area_m2 for c in contributions) / total_roof


def rollup(
    observations,
    households,
    merge_eps: float | None = None,
) -> tuple[list[BlockGroupDeployment], list[RollupIssue]]:
    """One deployment record per block group, ordered by block group id.

    Block groups with a missing or nonpositive household count are skipped
    and reported as issues; a block group with no detected roof area keeps
    its record but carries an undefined (None) PV-to-roof ratio.
    """
    groups: dict[str, list[ImageObservation]] = {}
    for obs in observations:
        groups.setdefault(obs.block_group_id, []).append(obs)
    records: list[BlockGroupDeployment] = []
    issues: list[RollupIssue] = []
    for bg_id in sorted(groups):
        contribs = [image_contribution(o, merge_eps) for o in groups[bg_id]]
        if bg_id not in households:
            issues.append(RollupIssue(bg_id, "missing household count"))
            continue
        hh = households[bg_id]
        if hh <= 0:
            issues.append(RollupIssue(bg_id, f"nonpositive household count {hh}"))
            continue
        count = sum(c.pv_count for c in contribs)
        pv_area = sum(c.pv_area_m2 for c in contribs)
        roof_area = sum(c.roof_area_m2 for c in contribs)
        if roof_area > 0:
            ratio = pv_area / roof_area
        else:
            ratio = None
            issues.append(RollupIssue(bg_id, "zero roof area; ratio undefined"))
        records.append(
            BlockGroupDeployment(bg_id, count, hh, pv_area, roof_area, count / hh, ratio)
        )
    return records, issues


def observation_from_boxes(
    image_id: str,
    block_group_id: str,
    gsd: float,
    boxes,
    nms_thresholds=None,
    apply_nms: bool = True,
) -> ImageObservation:
    """Build an observation from raw boxes, optionally running NMS first."""
    if apply_nms:
        boxes = nms(DetectionSet(image_id, list(boxes)), nms_thresholds).boxes
    return ImageObservation(
        image_id,
        block_group_id,
        tuple(b for b in boxes if b.cls is BoxClass.ROOF),
        tuple(b for b in boxes if b.cls is BoxClass.PV),
        gsd,
    )


# ---------------------------------------------------------------------------
# Interchange: one JSON object per image (image_id, block_group_id, gsd,
# boxes) on input; a flat CSV keyed by geoid on output.

def write_observations_jsonl(path, rows) -> None:
    """rows: iterables of (image_id, block_group_id, gsd, boxes)."""
    with open(path, "w") as fh:
        for image_id, bg_id, gsd, boxes in rows:
            fh.write(
                json.dumps(
                    {
                        "image_id": image_id,
                        "block_group_id": bg_id,
                        "gsd": gsd,
                        "boxes": [
                            {
                                "class": b.cls.value,
                                "score": b.score,
                                "bbox": [b.xmin, b.ymin, b.xmax, b.ymax],
                            }
                            for b in boxes
                        ],
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def read_observations_jsonl(path, nms_thresholds=None, apply_nms: bool = True):
    """Observations from JSON lines, running per-image NMS unless disabled."""
    out = []
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        boxes = [
            BBox(*b["bbox"], cls=BoxClass(b["class"]), score=b.get("score", 1.0))
            for b in rec["boxes"]
        ]
        out.append(
            observation_from_boxes(
                rec["image_id"], rec["block_group_id"], rec["gsd"], boxes,
                nms_thresholds=nms_thresholds, apply_nms=apply_nms,
            )
        )
    return out


DEPLOYMENT_CSV_COLUMNS = (
    "geoid",
    "pv_system_count",
    "households",
    "pv_area_m2",
    "roof_area_m2",
    "pv_count_per_hh",
    "pv_to_roof_ratio",
)


def write_deployment_csv(path, records: list[BlockGroupDeployment]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(DEPLOYMENT_CSV_COLUMNS)
        for r in records:
            writer.writerow(
                [
                    r.block_group_id,
                    r.pv_system_count,
                    r.households,
                    repr(r.pv_area_m2),
                    repr(r.roof_area_m2),
                    repr(r.pv_count_per_hh),
                    "" if r.pv_to_roof_ratio is None else repr(r.pv_to_roof_ratio),
                ]
            )


def read_deployment_csv(path) -> list[BlockGroupDeployment]:
    records = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            records.append(
                BlockGroupDeployment(
                    row["geoid"],
                    int(row["pv_system_count"]),
                    int(row["households"]),
                    float(row["pv_area_m2"]),
                    float(row["roof_area_m2"]),
                    float(row["pv_count_per_hh"]),
                    float(row["pv_to_roof_ratio"]) if row["pv_to_roof_ratio"] else None,
                )
            )
    return records
