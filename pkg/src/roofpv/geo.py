"""WGS84 / Web Mercator geometry kernel.

Points, polygons, image footprints, and tile planning over census units.
All angles are degrees, all ground distances are meters on the spherical
Web Mercator earth model (radius 6378137 m). Area computations use a local
Lambert azimuthal equal-area projection anchored at the polygon centroid,
which keeps distortion well below 0.2% at block-group scale.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import shapely.geometry as sgeom

EARTH_RADIUS_M = 6378137.0
EARTH_CIRCUMFERENCE_M = 2.0 * math.pi * EARTH_RADIUS_M
MERCATOR_LAT_LIMIT = 85.05112878  # poleward of this the projection diverges
TILE_BASE_PX = 256


@dataclass(frozen=True)
class GeoPoint:
    """Longitude/latitude pair in degrees (WGS84)."""

    lon: float
    lat: float

    def __post_init__(self):
        if not (math.isfinite(self.lon) and math.isfinite(self.lat)):
            raise ValueError(f"non-finite coordinate ({self.lon}, {self.lat})")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude {self.lon} outside [-180, 180]")
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude {self.lat} outside [-90, 90]")


Ring = tuple[GeoPoint, ...]


def _cross(ox, oy, ax, ay, bx, by):
    return (ax - ox) * (by - oy) - (ay - oy) * (bx - ox)


def _on_segment(px, py, qx, qy, rx, ry):
    """Whether collinear point r lies on segment pq."""
    return min(px, qx) <= rx <= max(px, qx) and min(py, qy) <= ry <= max(py, qy)


def _segments_intersect(p1, p2, q1, q2):
    """Whether segments p1p2 and q1q2 share any point."""
    d1 = _cross(q1[0], q1[1], q2[0], q2[1], p1[0], p1[1])
    d2 = _cross(q1[0], q1[1], q2[0], q2[1], p2[0], p2[1])
    d3 = _cross(p1[0], p1[1], p2[0], p2[1], q1[0], q1[1])
    d4 = _cross(p1[0], p1[1], p2[0], p2[1], q2[0], q2[1])
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 != 0 and d2 != 0:
        return True
    if d1 == 0 and _on_segment(q1[0], q1[1], q2[0], q2[1], p1[0], p1[1]):
        return True
    if d2 == 0 and _on_segment(q1[0], q1[1], q2[0], q2[1], p2[0], p2[1]):
        return True
    if d3 == 0 and _on_segment(p1[0], p1[1], p2[0], p2[1], q1[0], q1[1]):
        return True
    if d4 == 0 and _on_segment(p1[0], p1[1], p2[0], p2[1], q2[0], q2[1]):
        return True
    return False


def _ring_is_simple(coords):
    """O(n^2) simplicity check: non-adjacent edges never touch, adjacent edges
    share only their common endpoint and do not fold back on themselves."""
    n = len(coords)
    edges = [(coords[i], coords[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        a1, a2 = edges[i]
        for j in range(i + 1, n):
            adjacent = (j == i + 1) or (i == 0 and j == n - 1)
            b1, b2 = edges[j]
            if adjacent:
                shared = a2 if j == i + 1 else a1
                other_a = a1 if j == i + 1 else a2
                other_b = b2 if j == i + 1 else b1
                cr = _cross(shared[0], shared[1], other_a[0], other_a[1], other_b[0], other_b[1])
                if cr == 0:
                    dot = (other_a[0] - shared[0]) * (other_b[0] - shared[0]) + (
                        other_a[1] - shared[1]
                    ) * (other_b[1] - shared[1])
                    if dot > 0:  # edges fold back over each other
                        return False
            elif _segments_intersect(a1, a2, b1, b2):
                return False
    return True


def _signed_area(coords):
    acc = []
    n = len(coords)
    for i in range(n):
        x1, y1 = coords[i]
        x2, y2 = coords[(i + 1) % n]
        acc.append(x1 * y2 - x2 * y1)
    return 0.5 * math.fsum(acc)


def _point_in_ring(x, y, coords):
    """Ray-cast containment; boundary points count as inside."""
    n = len(coords)
    inside = False
    for i in range(n):
        x1, y1 = coords[i]
        x2, y2 = coords[(i + 1) % n]
        if _cross(x1, y1, x2, y2, x, y) == 0 and _on_segment(x1, y1, x2, y2, x, y):
            return True
        if (y1 > y) != (y2 > y):
            xin = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < xin:
                inside = not inside
    return inside


def _normalize_ring(points) -> Ring:
    pts = tuple(p if isinstance(p, GeoPoint) else GeoPoint(*p) for p in points)
    if len(pts) >= 2 and pts[0] == pts[-1]:
        pts = pts[:-1]
    return pts


@dataclass(frozen=True)
class Polygon:
    """Simple polygon with optional holes; rings implicitly closed.

    Validated on construction: rings have at least 3 distinct vertices and
    no self-intersections, the exterior has nonzero area, and hole vertices
    lie inside (or on) the exterior.
    """

    exterior: Ring
    holes: tuple[Ring, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "exterior", _normalize_ring(self.exterior))
        object.__setattr__(self, "holes", tuple(_normalize_ring(h) for h in self.holes))
        ext = self._coords(self.exterior)
        self._validate_ring(ext, "exterior")
        if _signed_area(ext) == 0.0:
            raise ValueError("exterior ring has zero area")
        for k, hole in enumerate(self.holes):
            hc = self._coords(hole)
            self._validate_ring(hc, f"hole {k}")
            for x, y in hc:
                if not _point_in_ring(x, y, ext):
                    raise ValueError(f"hole {k} vertex ({x}, {y}) outside exterior")

    @staticmethod
    def _coords(ring: Ring):
        return [(p.lon, p.lat) for p in ring]

    @staticmethod
    def _validate_ring(coords, label):
        if len(coords) < 3:
            raise ValueError(f"{label} ring needs at least 3 vertices")
        if len(set(coords)) != len(coords):
            raise ValueError(f"{label} ring has repeated vertices")
        if not _ring_is_simple(coords):
            raise ValueError(f"{label} ring is self-intersecting")

    @classmethod
    def from_coords(cls, exterior, holes=()) -> "Polygon":
        return cls(
            tuple(GeoPoint(lon, lat) for lon, lat in exterior),
            tuple(tuple(GeoPoint(lon, lat) for lon, lat in h) for h in holes),
        )

    def bounding_box(self) -> "GeoBounds":
        lons = [p.lon for p in self.exterior]
        lats = [p.lat for p in self.exterior]
        return GeoBounds(min(lons), min(lats), max(lons), max(lats))


@dataclass(frozen=True)
class BlockUnit:
    """Census unit: identifier, geometry, resident count."""

    geoid: str
    geometry: Polygon
    population: int

    def __post_init__(self):
        if not self.geoid:
            raise ValueError("geoid must be nonempty")
        if self.population < 0:
            raise ValueError(f"population {self.population} negative")


@dataclass(frozen=True)
class GeoBounds:
    """Axis-aligned geographic box in degrees."""

    west: float
    south: float
    east: float
    north: float

    def contains(self, p: GeoPoint) -> bool:
        return self.west <= p.lon <= self.east and self.south <= p.lat <= self.north

    @property
    def width(self) -> float:
        return self.east - self.west

    @property
    def height(self) -> float:
        return self.north - self.south


def ground_resolution(lat: float, zoom: int) -> float:
    """Ground meters per pixel of a 256px Web Mercator pyramid at a latitude.

    cos(lat) * earth_circumference / (256 * 2^zoom); 156543.034 m/px at the
    equator for zoom 0, halving with every zoom level.
    """
    if not -90.0 <= lat <= 90.0:
        raise ValueError(f"latitude {lat} outside [-90, 90]")
    if zoom < 0 or int(zoom) != zoom:
        raise ValueError(f"zoom {zoom} must be a nonnegative integer")
    return math.cos(math.radians(lat)) * EARTH_CIRCUMFERENCE_M / (TILE_BASE_PX * 2.0**zoom)


def mercator_resolution(zoom: int) -> float:
    """Projected (Mercator-plane) meters per pixel; latitude independent."""
    if zoom < 0 or int(zoom) != zoom:
        raise ValueError(f"zoom {zoom} must be a nonnegative integer")
    return EARTH_CIRCUMFERENCE_M / (TILE_BASE_PX * 2.0**zoom)


def mercator_xy(p: GeoPoint) -> tuple[float, float]:
    """Project to spherical Mercator meters; domain |lat| < 85.05112878."""
    if abs(p.lat) >= MERCATOR_LAT_LIMIT:
        raise ValueError(f"latitude {p.lat} at or beyond Mercator limit {MERCATOR_LAT_LIMIT}")
    x = EARTH_RADIUS_M * math.radians(p.lon)
    y = EARTH_RADIUS_M * math.log(math.tan(math.pi / 4.0 + math.radians(p.lat) / 2.0))
    return x, y


def mercator_point(x: float, y: float) -> GeoPoint:
    """Inverse spherical Mercator projection."""
    lon = math.degrees(x / EARTH_RADIUS_M)
    lat = math.degrees(2.0 * math.atan(math.exp(y / EARTH_RADIUS_M)) - math.pi / 2.0)
    return GeoPoint(lon, lat)


@dataclass(frozen=True)
class ImageFootprint:
    """Fixed-pixel image centered on a point at a given zoom.

    ``gsd_m_per_px`` is derived from the center latitude and cached. Zero
    pixel extents are permitted and describe a degenerate (point) footprint.
    """

    center: GeoPoint
    zoom: int
    width_px: int
    height_px: int
    gsd_m_per_px: float = field(init=False)

    def __post_init__(self):
        if self.zoom < 0 or int(self.zoom) != self.zoom:
            raise ValueError(f"zoom {self.zoom} must be a nonnegative integer")
        if self.width_px < 0 or self.height_px < 0:
            raise ValueError("pixel extents must be nonnegative")
        object.__setattr__(self, "gsd_m_per_px", ground_resolution(self.center.lat, self.zoom))


@dataclass(frozen=True)
class TilePlan:
    """Ordered image footprints covering one census unit."""

    unit_geoid: str
    footprints: tuple[ImageFootprint, ...]


def footprint_bounds(fp: ImageFootprint) -> GeoBounds:
    """Geographic box spanned by a footprint.

    The box spans width_px * gsd meters east-west and height_px * gsd meters
    north-south on the ground (equivalently width_px Mercator-plane pixels),
    converted back to degrees through the inverse projection.
    """
    x, y = mercator_xy(fp.center)
    res = mercator_resolution(fp.zoom)
    hw = fp.width_px * res / 2.0
    hh = fp.height_px * res / 2.0
    sw = mercator_point(x - hw, y - hh)
    ne = mercator_point(x + hw, y + hh)
    return GeoBounds(sw.lon, sw.lat, ne.lon, ne.lat)


def _to_shapely(p: Polygon) -> sgeom.Polygon:
    shell = [(pt.lon, pt.lat) for pt in p.exterior]
    holes = [[(pt.lon, pt.lat) for pt in h] for h in p.holes]
    return sgeom.Polygon(shell, holes)


def plan_tiles(unit: BlockUnit, zoom: int, width_px: int = 640, height_px: int = 640) -> TilePlan:
    """Grid of footprints covering a census unit's polygon.

    The grid is anchored at the northwest corner of the polygon's bounding
    box and spaced exactly one footprint apart in the Mercator plane, so
    neighbouring tiles abut with zero gap. Footprints whose bounds do not
    overlap the polygon (positive-area intersection) are dropped. Ordering
    is row-major, north to south then west to east.
    """
    if width_px <= 0 or height_px <= 0:
        raise ValueError("tile pixel extents must be positive")
    box = unit.geometry.bounding_box()
    if box.width <= 0 or box.height <= 0:
        raise ValueError(f"degenerate polygon bounding box for {unit.geoid}")
    x0, y0 = mercator_xy(GeoPoint(box.west, box.south))
    x1, y1 = mercator_xy(GeoPoint(box.east, box.north))
    res = mercator_resolution(zoom)
    tile_w = width_px * res
    tile_h = height_px * res
    # The 1e-9 slack keeps a bbox that is an exact multiple of the tile size
    # from spilling into a spurious extra row/column through float error.
    n_cols = max(1, math.ceil((x1 - x0) / tile_w - 1e-9))
    n_rows = max(1, math.ceil((y1 - y0) / tile_h - 1e-9))
    shp = _to_shapely(unit.geometry)
    kept = []
    for r in range(n_rows):
        cy = y1 - tile_h * (r + 0.5)
        for c in range(n_cols):
            cx = x0 + tile_w * (c + 0.5)
            fp = ImageFootprint(mercator_point(cx, cy), zoom, width_px, height_px)
            b = footprint_bounds(fp)
            cell = sgeom.box(b.west, b.south, b.east, b.north)
            if cell.intersection(shp).area > 0.0:
                kept.append(fp)
    return TilePlan(unit.geoid, tuple(kept))


def select_populated(blocks: list[BlockUnit]) -> list[BlockUnit]:
    """Blocks with at least one resident, order preserved."""
    return [b for b in blocks if b.population > 0]


def _ring_centroid(ring: Ring) -> tuple[float, float]:
    lon = math.fsum(p.lon for p in ring) / len(ring)
    lat = math.fsum(p.lat for p in ring) / len(ring)
    return lon, lat


def _laea_xy(p: GeoPoint, lon0: float, lat0: float) -> tuple[float, float]:
    """Lambert azimuthal equal-area projection about (lon0, lat0)."""
    lam = math.radians(p.lon - lon0)
    phi = math.radians(p.lat)
    phi0 = math.radians(lat0)
    denom = 1.0 + math.sin(phi0) * math.sin(phi) + math.cos(phi0) * math.cos(phi) * math.cos(lam)
    if denom <= 1e-12:
        raise ValueError("point antipodal to projection center")
    k = math.sqrt(2.0 / denom)
    x = EARTH_RADIUS_M * k * math.cos(phi) * math.sin(lam)
    y = EARTH_RADIUS_M * k * (
        math.cos(phi0) * math.sin(phi) - math.sin(phi0) * math.cos(phi) * math.cos(lam)
    )
    return x, y


def _project_ring(ring: Ring, lon0: float, lat0: float):
    return [_laea_xy(p, lon0, lat0) for p in ring]


def polygon_area_m2(p: Polygon) -> float:
    """Surface area in square meters (holes subtracted).

    Shoelace area of the rings projected through an equal-area map anchored
    at the exterior's vertex centroid.
    """
    lon0, lat0 = _ring_centroid(p.exterior)
    area = abs(_signed_area(_project_ring(p.exterior, lon0, lat0)))
    for hole in p.holes:
        area -= abs(_signed_area(_project_ring(hole, lon0, lat0)))
    if area <= 0.0:
        raise ValueError("degenerate polygon: holes cancel the exterior area")
    return area


def _canonical_key(p: Polygon):
    return tuple(sorted((pt.lon, pt.lat) for pt in p.exterior))


def intersection_area_m2(a: Polygon, b: Polygon) -> float:
    """Area of the geometric intersection of two polygons, square meters.

    Both polygons are projected onto a shared equal-area plane and clipped
    there. Arguments are ordered canonically before clipping and the result
    is clamped to min(area(a), area(b)), so the operation is exactly
    symmetric and never exceeds either input area.
    """
    if a == b:
        return polygon_area_m2(a)
    ca = _ring_centroid(a.exterior)
    cb = _ring_centroid(b.exterior)
    lon0 = (ca[0] + cb[0]) / 2.0
    lat0 = (ca[1] + cb[1]) / 2.0

    def planar(p: Polygon) -> sgeom.Polygon:
        shell = _project_ring(p.exterior, lon0, lat0)
        holes = [_project_ring(h, lon0, lat0) for h in p.holes]
        return sgeom.Polygon(shell, holes)

    first, second = (a, b) if _canonical_key(a) <= _canonical_key(b) else (b, a)
    inter = planar(first).intersection(planar(second))
    raw = inter.area
    return max(0.0, min(raw, polygon_area_m2(a), polygon_area_m2(b)))


def read_block_units(source) -> list[BlockUnit]:
    """Load BlockUnits from a GeoJSON feature collection.

    Features carry ``geoid`` (string) and ``population`` (integer)
    properties; MultiPolygon geometry is exploded into one BlockUnit per
    part, all sharing the feature's geoid.
    """
    if isinstance(source, (str, Path)):
        data = json.loads(Path(source).read_text())
    else:
        data = source
    units = []
    for feature in data["features"]:
        props = feature.get("properties") or {}
        geoid = props.get("geoid")
        if not geoid:
            raise ValueError("feature missing 'geoid' property")
        population = int(props.get("population", 0))
        geom = feature["geometry"]
        if geom["type"] == "Polygon":
            parts = [geom["coordinates"]]
        elif geom["type"] == "MultiPolygon":
            parts = geom["coordinates"]
        else:
            raise ValueError(f"unsupported geometry type {geom['type']} for {geoid}")
        for rings in parts:
            poly = Polygon.from_coords(rings[0], rings[1:])
            units.append(BlockUnit(str(geoid), poly, population))
    return units
