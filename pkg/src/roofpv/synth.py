"""Seeded synthetic ground truth for the pipeline's oracle tests.

Scenes are collections of per-image roof/PV rectangles with exact per
block-group deployment truth. Roofs sit on a jittered in-image grid so no
two overlap and none crosses an image boundary, and every PV rectangle
lies strictly inside its roof; a perfect detector therefore survives NMS
untouched and the deployment rollup must reproduce the scene truth
exactly. Regression datasets come with their generating coefficient
structure so linear fits, marginal effects, and importance rankings have
known answers.

All generators are pure functions of (spec, seed); per-image and
per-feature streams derive from the seed via spawn keys, so output is
independent of evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .deploy import BlockGroupDeployment
from .detect import BBox, BoxClass, DetectionSet, GroundTruthBox
from .learn.data import Dataset

_BG_SEED = 104729  # spawn-key namespaces for the per-entity rng streams
_IMG_SEED = 1299709


@dataclass(frozen=True)
class SceneSpec:
    """Scene shape knobs.

    ``images_per_bg`` fixes the image count per block group; when None the
    count is Poisson with mean ``images_per_bg_mean`` (the full-scale
    deployment averages roughly 189 images per block group). Households
    default to one per roof, matching the single-family scale at which a
    PV adoption probability translates directly into systems per
    household.
    """

    n_block_groups: int = 4
    images_per_bg: int | None = 12
    images_per_bg_mean: float = 189.0
    image_px: int = 640
    zoom: int = 20
    gsd_m_per_px: float = 0.1149
    max_roofs_per_image: int = 5
    roof_min_px: float = 24.0
    roof_max_px: float = 56.0
    pv_adoption_prob: float = 0.3
    pv_coverage_min: float = 0.05
    pv_coverage_max: float = 0.25
    pv_coverage: float | None = None  # fixed coverage fraction override
    households: tuple[int, ...] | None = None
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.pv_adoption_prob <= 1.0:
            raise ValueError("pv_adoption_prob outside [0, 1]")
        if self.roof_min_px <= 0 or self.roof_max_px < self.roof_min_px:
            raise ValueError("roof size range invalid")
        if not 0.0 < self.pv_coverage_min <= self.pv_coverage_max <= 1.0:
            raise ValueError("pv coverage range invalid")
        if self.pv_coverage is not None and not 0.0 < self.pv_coverage <= 1.0:
            raise ValueError("fixed pv coverage outside (0, 1]")
        if self.image_px < self.roof_max_px + 10:
            raise ValueError("image too small for the roof size distribution")
        if self.households is not None and len(self.households) != self.n_block_groups:
            raise ValueError("households override length mismatch")


@dataclass(frozen=True)
class ImageTruth:
    image_id: str
    block_group_id: str
    gsd_m_per_px: float
    roofs: tuple[tuple[float, float, float, float], ...]
    pvs: tuple[tuple[float, float, float, float], ...]


@dataclass(frozen=True)
class BlockGroupTruth:
    geoid: str
    households: int
    pv_system_count: int
    pv_area_m2: float
    roof_area_m2: float


@dataclass(frozen=True)
class Scene:
    spec: SceneSpec
    images: tuple[ImageTruth, ...]
    block_groups: tuple[BlockGroupTruth, ...]


def _rng(seed: int, *key: int):
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


def _place_roofs(rng, spec: SceneSpec):
    """Non-overlapping roofs fully inside the image, via a jittered grid."""
    cell = spec.roof_max_px + 8.0
    k = int(spec.image_px // cell)
    n_cells = k * k
    if n_cells == 0:
        return []
    n_roofs = int(rng.integers(0, min(spec.max_roofs_per_image, n_cells) + 1))
    if n_roofs == 0:
        return []
    cells = rng.choice(n_cells, size=n_roofs, replace=False)
    roofs = []
    for c in sorted(cells):
        row, col = divmod(int(c), k)
        w = float(rng.uniform(spec.roof_min_px, spec.roof_max_px))
        h = float(rng.uniform(spec.roof_min_px, spec.roof_max_px))
        x0 = col * cell + float(rng.uniform(1.0, cell - w - 1.0))
        y0 = row * cell + float(rng.uniform(1.0, cell - h - 1.0))
        roofs.append((x0, y0, x0 + w, y0 + h))
    return roofs


def _place_pv(rng, roof, spec: SceneSpec):
    if spec.pv_coverage is not None:
        coverage = spec.pv_coverage
    else:
        coverage = float(rng.uniform(spec.pv_coverage_min, spec.pv_coverage_max))
    scale = math.sqrt(coverage)
    x0, y0, x1, y1 = roof
    w = (x1 - x0) * scale
    h = (y1 - y0) * scale
    cx = (x0 + x1) / 2.0
    cy = (y0 + y1) / 2.0
    return (cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)


def generate_scene(spec: SceneSpec) -> Scene:
    """Deterministic scene for the given spec (same seed, same scene)."""
    images = []
    truths = []
    for b in range(spec.n_block_groups):
        geoid = f"SYNBG{b:05d}"
        bg_rng = _rng(spec.seed, _BG_SEED, b)
        if spec.images_per_bg is not None:
            n_images = spec.images_per_bg
        else:
            n_images = max(1, int(bg_rng.poisson(spec.images_per_bg_mean)))
        total_roofs = 0
        pv_count = 0
        pv_area_m2 = 0.0
        roof_area_m2 = 0.0
        scale = spec.gsd_m_per_px**2
        for i in range(n_images):
            rng = _rng(spec.seed, _IMG_SEED, b, i)
            roofs = _place_roofs(rng, spec)
            pvs = []
            for roof in roofs:
                if rng.random() < spec.pv_adoption_prob:
                    pvs.append(_place_pv(rng, roof, spec))
            image_id = f"{geoid}_img{i:04d}"
            images.append(ImageTruth(image_id, geoid, spec.gsd_m_per_px, tuple(roofs), tuple(pvs)))
            total_roofs += len(roofs)
            # accumulate per image with the deployment rollup's own operation
            # order (sum box areas, scale once per image) so the pipeline can
            # reproduce the truth bit for bit
            if roofs:
                pv_count += len(pvs)
                pv_area_m2 += sum((p[2] - p[0]) * (p[3] - p[1]) for p in pvs) * scale
                roof_area_m2 += sum((r[2] - r[0]) * (r[3] - r[1]) for r in roofs) * scale
        if spec.households is not None:
            hh = spec.households[b]
        else:
            hh = max(1, total_roofs)
        truths.append(BlockGroupTruth(geoid, hh, pv_count, pv_area_m2, roof_area_m2))
    return Scene(spec, tuple(images), tuple(truths))


def scene_ground_truth(scene: Scene) -> dict[str, list[GroundTruthBox]]:
    """Truth boxes in the detect-module format, keyed by image."""
    out: dict[str, list[GroundTruthBox]] = {}
    for img in scene.images:
        boxes = [GroundTruthBox(*r, cls=BoxClass.ROOF) for r in img.roofs]
        boxes += [GroundTruthBox(*p, cls=BoxClass.PV) for p in img.pvs]
        out[img.image_id] = boxes
    return out


def truth_deployments(scene: Scene) -> list[BlockGroupDeployment]:
    """Scene truth in the deployment-record shape (sorted by geoid)."""
    records = []
    for t in sorted(scene.block_groups, key=lambda t: t.geoid):
        ratio = t.pv_area_m2 / t.roof_area_m2 if t.roof_area_m2 > 0 else None
        records.append(
            BlockGroupDeployment(
                t.geoid,
                t.pv_system_count,
                t.households,
                t.pv_area_m2,
                t.roof_area_m2,
                t.pv_system_count / t.households,
                ratio,
            )
        )
    return records


def scene_households(scene: Scene) -> dict[str, int]:
    return {t.geoid: t.households for t in scene.block_groups}


@dataclass(frozen=True)
class DetectorModel:
    """Pluggable detector: ``perfect`` replays truth with score 1.0;
    ``noisy`` jitters coordinates, drops boxes, and adds spurious ones,
    with true-positive scores (Beta) stochastically dominating the
    spurious scores so precision-recall curves are nontrivial."""

    mode: str = "perfect"
    jitter_px: float = 0.0
    drop_prob: float = 0.0
    spurious_rate: float = 0.0
    tp_score: tuple[float, float] = (8.0, 2.0)
    fp_score: tuple[float, float] = (2.0, 5.0)
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("perfect", "noisy"):
            raise ValueError(f"unknown detector mode {self.mode!r}")
        if not 0.0 <= self.drop_prob <= 1.0:
            raise ValueError("drop_prob outside [0, 1]")


def _jitter_box(rng, box, sigma, lo, hi, min_px=1.0):
    x0, y0, x1, y1 = (c + float(rng.normal(0.0, sigma)) for c in box)
    x0, x1 = sorted((x0, x1))
    y0, y1 = sorted((y0, y1))
    x0 = min(max(x0, lo), hi - min_px)
    y0 = min(max(y0, lo), hi - min_px)
    x1 = min(max(x1, x0 + min_px), hi)
    y1 = min(max(y1, y0 + min_px), hi)
    return x0, y0, x1, y1


def render_detections(scene: Scene, detector: DetectorModel) -> list[DetectionSet]:
    """Detector output per image, ordered as the scene's images."""
    out = []
    for idx, img in enumerate(scene.images):
        boxes: list[BBox] = []
        truth = [(r, BoxClass.ROOF) for r in img.roofs] + [(p, BoxClass.PV) for p in img.pvs]
        if detector.mode == "perfect":
            boxes = [BBox(*coords, cls=cls, score=1.0) for coords, cls in truth]
        else:
            rng = _rng(detector.seed, idx)
            size = scene.spec.image_px
            for coords, cls in truth:
                if rng.random() < detector.drop_prob:
                    continue
                if detector.jitter_px > 0:
                    coords = _jitter_box(rng, coords, detector.jitter_px, 0.0, size)
                score = float(rng.beta(*detector.tp_score))
                boxes.append(BBox(*coords, cls=cls, score=score))
            for _ in range(int(rng.poisson(detector.spurious_rate))):
                w = float(rng.uniform(scene.spec.roof_min_px / 2, scene.spec.roof_max_px))
                h = float(rng.uniform(scene.spec.roof_min_px / 2, scene.spec.roof_max_px))
                x0 = float(rng.uniform(0, size - w))
                y0 = float(rng.uniform(0, size - h))
                cls = BoxClass.ROOF if rng.random() < 0.5 else BoxClass.PV
                score = float(rng.beta(*detector.fp_score))
                boxes.append(BBox(x0, y0, x0 + w, y0 + h, cls=cls, score=score))
        out.append(DetectionSet(img.image_id, boxes))
    return out


def scene_observation_rows(scene: Scene, detections: list[DetectionSet]):
    """(image_id, block_group_id, gsd, boxes) rows for the deploy format."""
    by_id = {d.image_id: d for d in detections}
    rows = []
    for img in scene.images:
        det = by_id.get(img.image_id)
        rows.append((img.image_id, img.block_group_id, img.gsd_m_per_px, det.boxes if det else []))
    return rows


# ---------------------------------------------------------------------------
# Synthetic regression datasets with known coefficient structure.

@dataclass(frozen=True)
class RegressionTerm:
    coef: float
    kind: str  # "linear" | "squared" | "interaction" | "sin_pair"
    features: tuple[int, ...]

    def __post_init__(self):
        want = 2 if self.kind in ("interaction", "sin_pair") else 1
        if self.kind not in ("linear", "squared", "interaction", "sin_pair"):
            raise ValueError(f"unknown term kind {self.kind!r}")
        if len(self.features) != want:
            raise ValueError(f"{self.kind} takes {want} features")

    def evaluate(self, X: np.ndarray) -> np.ndarray:
        if self.kind == "linear":
            return self.coef * X[:, self.features[0]]
        if self.kind == "squared":
            return self.coef * X[:, self.features[0]] ** 2
        if self.kind == "interaction":
            return self.coef * X[:, self.features[0]] * X[:, self.features[1]]
        return self.coef * np.sin(np.pi * X[:, self.features[0]] * X[:, self.features[1]])


@dataclass(frozen=True)
class SynthRegressionSpec:
    n: int
    n_features: int
    terms: tuple[RegressionTerm, ...]
    noise_sigma: float = 0.0
    correlated_pairs: tuple[tuple[int, int, float], ...] = ()
    feature_names: tuple[str, ...] | None = None
    tag: str = "synth"
    seed: int = 0

    def __post_init__(self):
        for t in self.terms:
            if max(t.features) >= self.n_features:
                raise ValueError("term references a feature beyond n_features")
        for i, j, rho in self.correlated_pairs:
            if not -1.0 <= rho <= 1.0:
                raise ValueError("correlation outside [-1, 1]")
        if self.feature_names is not None and len(self.feature_names) != self.n_features:
            raise ValueError("feature_names length mismatch")


def generate_regression(spec: SynthRegressionSpec) -> tuple[Dataset, tuple[RegressionTerm, ...]]:
    """Dataset plus its generative truth (the coefficient structure)."""
    rng = _rng(spec.seed, 0)
    X = rng.uniform(0.0, 1.0, size=(spec.n, spec.n_features))
    for i, j, rho in spec.correlated_pairs:
        # mix column j toward column i; clipping keeps the unit range
        mixed = rho * X[:, i] + math.sqrt(max(0.0, 1.0 - rho * rho)) * X[:, j]
        X[:, j] = np.clip(mixed, 0.0, 1.0)
    y = np.zeros(spec.n)
    for term in spec.terms:
        y += term.evaluate(X)
    if spec.noise_sigma > 0:
        y += spec.noise_sigma * rng.standard_normal(spec.n)
    names = spec.feature_names or tuple(f"x{i}" for i in range(spec.n_features))
    return Dataset(X, y, names, spec.tag), spec.terms


def friedman_interaction_spec(n: int = 2000, noise_sigma: float = 1.0, seed: int = 7) -> SynthRegressionSpec:
    """Friedman-style nonlinear benchmark with an extra pairwise interaction:
    y = 10 sin(pi x0 x1) + 20 (x2 - 0.5)^2 + 10 x3 + 5 x4 + 8 x5 x6 + noise."""
    terms = (
        RegressionTerm(10.0, "sin_pair", (0, 1)),
        RegressionTerm(20.0, "squared", (2,)),
        RegressionTerm(-20.0, "linear", (2,)),  # completes 20 (x2 - 1/2)^2 up to a constant
        RegressionTerm(10.0, "linear", (3,)),
        RegressionTerm(5.0, "linear", (4,)),
        RegressionTerm(8.0, "interaction", (5, 6)),
    )
    return SynthRegressionSpec(n, 10, terms, noise_sigma, seed=seed, tag="friedman")


INCOME_RACE_FEATURES = ("income", "asian", "hispanic", "white", "age")


def income_race_interaction_spec(n: int = 1500, noise_sigma: float = 0.05, seed: int = 11) -> SynthRegressionSpec:
    """Known-sign interaction structure: the income effect rises with the
    asian share (+3 income x asian) and falls with the hispanic share
    (-3 income x hispanic)."""
    terms = (
        RegressionTerm(2.0, "linear", (0,)),
        RegressionTerm(1.0, "linear", (1,)),
        RegressionTerm(-1.0, "linear", (2,)),
        RegressionTerm(0.5, "linear", (3,)),
        RegressionTerm(3.0, "interaction", (0, 1)),
        RegressionTerm(-3.0, "interaction", (0, 2)),
    )
    return SynthRegressionSpec(
        n, len(INCOME_RACE_FEATURES), terms, noise_sigma,
        feature_names=INCOME_RACE_FEATURES, tag="income_race", seed=seed,
    )


def to_table_schema(ds: Dataset, target: str = "PV Count per HH") -> tuple[Dataset, list[dict]]:
    """Remap a synthetic dataset onto the block-group schema.

    The first min(p, 43) features map affinely from [0, 1] onto each
    schema feature's legal range and take its name; the target maps onto
    the chosen deployment target's range. Returns the renamed dataset and
    the records (geoid + values) for schema validation.
    """
    from .ingest.schema import FEATURES, TABLE_SCHEMA

    specs = FEATURES[: ds.p]
    if len(specs) < ds.p:
        raise ValueError(f"at most {len(FEATURES)} features can carry schema names")
    tspec = TABLE_SCHEMA.by_name(target)
    X = np.empty_like(ds.X)
    for j, fs in enumerate(specs):
        col = ds.X[:, j]
        lo, hi = col.min(), col.max()
        unit = (col - lo) / (hi - lo) if hi > lo else np.zeros_like(col)
        X[:, j] = fs.min_value + unit * (fs.max_value - fs.min_value)
    ylo, yhi = ds.y.min(), ds.y.max()
    yunit = (ds.y - ylo) / (yhi - ylo) if yhi > ylo else np.zeros_like(ds.y)
    y = tspec.min_value + yunit * (tspec.max_value - tspec.min_value)
    names = tuple(fs.name for fs in specs)
    mapped = Dataset(X, y, names, ds.tag)
    records = []
    for i in range(mapped.n):
        values = {name: float(mapped.X[i, j]) for j, name in enumerate(names)}
        values[target] = float(mapped.y[i])
        records.append({"geoid": f"SYNREC{i:06d}", "values": values})
    return mapped, records
