"""Spatial joins, tract broadcasts, adjacency imputation, schema validation.

Join rules
----------
- Overlay layers (jurisdiction, utility, county): a block group takes the
  payload of the candidate polygon holding the largest share of its area;
  exact ties go to the lexicographically smallest candidate id.
- Zip layers: among the zips overlapping the block group, the most
  populous one supplies the payload; ties go to the smallest zip code.
- Tract-level values broadcast verbatim onto every block group whose
  geoid prefix (first 11 digits) names the tract.
- Missing values in the imputable features are filled with the mean of
  non-null rook-adjacent neighbors; a second pass reuses first-pass fills
  for nodes whose neighborhoods were entirely null, and anything still
  null is flagged unresolvable (flagged values are never re-imputed, so
  the operation is idempotent).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

from .. import geo
from .schema import SVI_FEATURES, TABLE_SCHEMA, Schema

import json

import shapely.geometry as sgeom


@dataclass
class BlockGroupRecord:
    """One row of the feature table; None marks a missing value."""

    geoid: str
    values: dict[str, float | None] = field(default_factory=dict)
    flags: set[str] = field(default_factory=set)

    def __post_init__(self):
        if not self.geoid:
            raise ValueError("geoid must be nonempty")

    @property
    def tract_geoid(self) -> str:
        """Parent tract: the first 11 digits of a 12-digit block-group geoid."""
        return self.geoid[:11]


@dataclass(frozen=True)
class OverlayFeature:
    feature_id: str
    geometry: geo.Polygon
    attrs: dict[str, float]
    population: int | None = None  # zip layers only


@dataclass(frozen=True)
class OverlayLayer:
    name: str
    features: tuple[OverlayFeature, ...]

    def __post_init__(self):
        known = set(TABLE_SCHEMA.names())
        for f in self.features:
            unknown = set(f.attrs) - known
            if unknown:
                raise ValueError(
                    f"layer {self.name!r} feature {f.feature_id!r} carries "
                    f"non-schema attributes {sorted(unknown)}"
                )


@dataclass(frozen=True)
class AdjacencyGraph:
    """Symmetric, irreflexive shared-boundary adjacency between geoids."""

    neighbors: dict[str, frozenset[str]]

    def __post_init__(self):
        for g, ns in self.neighbors.items():
            if g in ns:
                raise ValueError(f"adjacency of {g} is reflexive")
            for other in ns:
                if g not in self.neighbors.get(other, frozenset()):
                    raise ValueError(f"adjacency {g} -> {other} is not symmetric")

    def of(self, geoid: str) -> frozenset[str]:
        return self.neighbors.get(geoid, frozenset())


def spatial_join_largest_share(bg: geo.Polygon, layer: OverlayLayer) -> OverlayFeature | None:
    """Candidate polygon holding the largest share of the block group's area.

    Returns None when nothing overlaps (the record should be flagged
    unassigned); exact area ties resolve to the smallest candidate id.
    """
    best: tuple[float, str] | None = None
    best_feature = None
    for feature in layer.features:
        share = geo.intersection_area_m2(bg, feature.geometry)
        if share <= 0.0:
            continue
        key = (-share, feature.feature_id)
        if best is None or key < best:
            best = key
            best_feature = feature
    return best_feature


def assign_zip_by_population(bg: geo.Polygon, zip_layer: OverlayLayer) -> OverlayFeature | None:
    """Most populous zip among those overlapping the block group.

    Ties go to the numerically (lexicographically) smallest zip code;
    returns None when no zip overlaps.
    """
    best_key: tuple[float, str] | None = None
    best_feature = None
    for feature in zip_layer.features:
        if feature.population is None:
            raise ValueError(f"zip {feature.feature_id!r} missing population")
        if geo.intersection_area_m2(bg, feature.geometry) <= 0.0:
            continue
        key = (-float(feature.population), feature.feature_id)
        if best_key is None or key < best_key:
            best_key = key
            best_feature = feature
    return best_feature


def broadcast_tract_to_blockgroups(
    records: list[BlockGroupRecord],
    tract_values: dict[str, dict[str, float]],
    features: tuple[str, ...] = SVI_FEATURES,
) -> list[str]:
    """Copy tract-level values verbatim onto child block groups.

    Returns the geoids flagged for an unknown parent tract; other records
    are unaffected.
    """
    missing = []
    for rec in records:
        tract = rec.tract_geoid
        if tract not in tract_values:
            rec.flags.add("unknown_tract")
            missing.append(rec.geoid)
            continue
        row = tract_values[tract]
        for name in features:
            if name in row:
                rec.values[name] = row[name]
    return missing


@dataclass
class ImputationResult:
    filled: dict[str, int]  # feature -> number of values filled
    unresolved: list[tuple[str, str]]  # (geoid, feature) still null


def impute_adjacent_mean(
    records: list[BlockGroupRecord],
    graph: AdjacencyGraph,
    features: tuple[str, ...] = ("Median Home Value", "Year Structure Built"),
) -> ImputationResult:
    """Fill nulls with the mean of non-null neighbor values (two passes).

    Pass one reads only original values; pass two reuses pass-one fills for
    nodes whose neighborhoods were entirely null. Values that remain null
    are flagged ``unresolvable:<feature>`` and skipped by any later run,
    which makes the operation idempotent.
    """
    by_geoid = {r.geoid: r for r in records}
    filled = {f: 0 for f in features}
    for feature in features:
        flag = f"unresolvable:{feature}"
        for _ in range(2):
            current = {g: r.values.get(feature) for g, r in by_geoid.items()}
            updates = {}
            for rec in records:
                if rec.values.get(feature) is not None or flag in rec.flags:
                    continue
                vals = [
                    current[n]
                    for n in sorted(graph.of(rec.geoid))
                    if n in current and current[n] is not None
                ]
                if vals:
                    updates[rec.geoid] = sum(vals) / len(vals)
            for g, v in updates.items():
                by_geoid[g].values[feature] = v
                filled[feature] += 1
    unresolved = []
    for rec in records:
        for feature in features:
            if rec.values.get(feature) is None:
                rec.flags.add(f"unresolvable:{feature}")
                unresolved.append((rec.geoid, feature))
    return ImputationResult(filled, unresolved)


@dataclass(frozen=True)
class FeatureValidation:
    feature: str
    nulls: int
    out_of_range: int
    offending: tuple[str, ...]  # geoids with out-of-range values


@dataclass
class ValidationReport:
    per_feature: dict[str, FeatureValidation]
    n_records: int

    @property
    def total_violations(self) -> int:
        return sum(v.out_of_range for v in self.per_feature.values())

    @property
    def ok(self) -> bool:
        return self.total_violations == 0

    def csv_rows(self) -> list[list]:
        rows = [["feature", "nulls", "out_of_range", "offending_geoids"]]
        for name, v in self.per_feature.items():
            rows.append([name, v.nulls, v.out_of_range, ";".join(v.offending)])
        return rows


def validate_schema(records: list[BlockGroupRecord], schema: Schema = TABLE_SCHEMA) -> ValidationReport:
    """Null and range audit of every schema column; purely a report."""
    per_feature = {}
    for spec in schema.rows:
        nulls = 0
        offending = []
        for rec in records:
            v = rec.values.get(spec.name)
            if v is None:
                nulls += 1
            elif not spec.in_range(v):
                offending.append(rec.geoid)
        per_feature[spec.name] = FeatureValidation(spec.name, nulls, len(offending), tuple(offending))
    return ValidationReport(per_feature, len(records))


def build_adjacency(units: list[geo.BlockUnit]) -> AdjacencyGraph:
    """Rook contiguity: units sharing a boundary of positive length."""
    shapes = []
    for u in units:
        shell = [(p.lon, p.lat) for p in u.geometry.exterior]
        holes = [[(p.lon, p.lat) for p in h] for h in u.geometry.holes]
        shapes.append((u.geoid, sgeom.Polygon(shell, holes)))
    neighbors: dict[str, set[str]] = {g: set() for g, _ in shapes}
    for i in range(len(shapes)):
        gi, si = shapes[i]
        for j in range(i + 1, len(shapes)):
            gj, sj = shapes[j]
            if gi == gj:
                continue
            inter = si.intersection(sj)
            if inter.is_empty:
                continue
            if getattr(inter, "length", 0.0) > 0.0 or getattr(inter, "area", 0.0) > 0.0:
                neighbors[gi].add(gj)
                neighbors[gj].add(gi)
    return AdjacencyGraph({g: frozenset(ns) for g, ns in neighbors.items()})


def read_overlay_layer(
    source,
    name: str,
    id_property: str,
    value_properties: tuple[str, ...] | None = None,
    population_property: str | None = None,
) -> OverlayLayer:
    """Overlay layer from a GeoJSON feature collection.

    ``value_properties`` restricts which properties become payload (all
    schema-named properties otherwise); ``population_property`` marks zip
    layers carrying a population count.
    """
    if isinstance(source, (str, Path)):
        data = json.loads(Path(source).read_text())
    else:
        data = source
    known = set(TABLE_SCHEMA.names())
    features = []
    for feature in data["features"]:
        props = feature.get("properties") or {}
        fid = props.get(id_property)
        if fid is None:
            raise ValueError(f"layer {name!r}: feature missing {id_property!r}")
        geom = feature["geometry"]
        if geom["type"] == "Polygon":
            parts = [geom["coordinates"]]
        elif geom["type"] == "MultiPolygon":
            parts = geom["coordinates"]
        else:
            raise ValueError(f"layer {name!r}: unsupported geometry {geom['type']}")
        if value_properties is None:
            attrs = {k: float(v) for k, v in props.items() if k in known and v is not None}
        else:
            attrs = {k: float(props[k]) for k in value_properties if props.get(k) is not None}
        population = None
        if population_property is not None:
            if props.get(population_property) is None:
                raise ValueError(f"layer {name!r}: feature {fid!r} missing population")
            population = int(props[population_property])
        for rings in parts:
            poly = geo.Polygon.from_coords(rings[0], rings[1:])
            features.append(OverlayFeature(str(fid), poly, attrs, population))
    return OverlayLayer(name, tuple(features))


# ---------------------------------------------------------------------------
# Feature-table CSV: geoid column plus the schema columns in order.

def write_features_csv(path, records: list[BlockGroupRecord], schema: Schema = TABLE_SCHEMA) -> None:
    names = schema.names()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["geoid", *names])
        for rec in sorted(records, key=lambda r: r.geoid):
            row = [rec.geoid]
            for name in names:
                v = rec.values.get(name)
                row.append("" if v is None else repr(float(v)))
            writer.writerow(row)


def read_features_csv(path) -> list[BlockGroupRecord]:
    records = []
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    header = rows[0]
    if header[0] != "geoid":
        raise ValueError("feature CSV must start with a geoid column")
    for row in rows[1:]:
        values = {
            name: (float(cell) if cell != "" else None)
            for name, cell in zip(header[1:], row[1:])
        }
        records.append(BlockGroupRecord(row[0], values))
    return records


def read_tract_csv(path, features: tuple[str, ...] = SVI_FEATURES) -> dict[str, dict[str, float]]:
    """Tract-level values keyed by tract geoid (first column ``tract``)."""
    out: dict[str, dict[str, float]] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            tract = row.get("tract") or row.get("geoid")
            if not tract:
                raise ValueError("tract CSV needs a 'tract' or 'geoid' column")
            out[tract] = {f: float(row[f]) for f in features if row.get(f) not in (None, "")}
    return out


def read_households_csv(path) -> dict[str, int]:
    out = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out[row["geoid"]] = int(row["households"])
    return out
