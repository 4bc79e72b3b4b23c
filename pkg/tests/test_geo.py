import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roofpv import geo
from roofpv.geo import BlockUnit, GeoPoint, ImageFootprint, Polygon


def meters_square(lat0, lon0, side_m, offset_x=0.0, offset_y=0.0):
    """Axis-aligned square of the given side length, built on a local
    tangent plane about (lon0, lat0) and mapped back to degrees."""
    R = geo.EARTH_RADIUS_M

    def to_deg(x, y):
        lat = lat0 + math.degrees(y / R)
        lon = lon0 + math.degrees(x / (R * math.cos(math.radians(lat0))))
        return (lon, lat)

    pts = [
        to_deg(offset_x, offset_y),
        to_deg(offset_x + side_m, offset_y),
        to_deg(offset_x + side_m, offset_y + side_m),
        to_deg(offset_x, offset_y + side_m),
    ]
    return Polygon.from_coords(pts)


class TestGroundResolution:
    def test_equator_zoom0(self):
        assert geo.ground_resolution(0, 0) == pytest.approx(156543.034, abs=0.01)

    def test_pole_is_zero(self):
        assert abs(geo.ground_resolution(90, 20)) < 1e-12

    def test_denver_zoom20(self):
        assert geo.ground_resolution(39.7, 20) == pytest.approx(0.1149, abs=0.0005)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            geo.ground_resolution(91, 5)
        with pytest.raises(ValueError):
            geo.ground_resolution(10, -1)

    @given(lat=st.floats(-89, 89), zoom=st.integers(0, 22))
    def test_halves_per_zoom_and_even_in_lat(self, lat, zoom):
        r = geo.ground_resolution(lat, zoom)
        assert r >= 0
        assert geo.ground_resolution(lat, zoom + 1) == pytest.approx(r / 2, rel=1e-12)
        assert geo.ground_resolution(-lat, zoom) == pytest.approx(r, rel=1e-12)


class TestPointAndPolygonValidity:
    def test_bad_points(self):
        with pytest.raises(ValueError):
            GeoPoint(181.0, 0.0)
        with pytest.raises(ValueError):
            GeoPoint(0.0, -90.5)
        with pytest.raises(ValueError):
            GeoPoint(float("nan"), 0.0)

    def test_closing_vertex_dropped(self):
        p = Polygon.from_coords([(0, 0), (1, 0), (1, 1), (0, 1), (0, 0)])
        assert len(p.exterior) == 4

    def test_too_few_vertices(self):
        with pytest.raises(ValueError):
            Polygon.from_coords([(0, 0), (1, 0)])

    def test_self_intersecting_bowtie(self):
        with pytest.raises(ValueError):
            Polygon.from_coords([(0, 0), (1, 1), (1, 0), (0, 1)])

    def test_zero_area_collinear(self):
        with pytest.raises(ValueError):
            Polygon.from_coords([(0, 0), (1, 1), (2, 2)])

    def test_hole_outside_exterior(self):
        with pytest.raises(ValueError):
            Polygon.from_coords(
                [(0, 0), (1, 0), (1, 1), (0, 1)],
                holes=[[(2, 2), (3, 2), (3, 3), (2, 3)]],
            )

    def test_repeated_vertex(self):
        with pytest.raises(ValueError):
            Polygon.from_coords([(0, 0), (1, 0), (1, 1), (1, 0), (0, 1)])


class TestFootprintBounds:
    def test_zero_extent_degenerates_to_center(self):
        fp = ImageFootprint(GeoPoint(-105.0, 39.7), 20, 0, 0)
        b = geo.footprint_bounds(fp)
        assert b.west == b.east == pytest.approx(-105.0)
        assert b.south == b.north == pytest.approx(39.7)

    def test_ground_extent_matches_gsd(self):
        fp = ImageFootprint(GeoPoint(-105.0, 39.7), 20, 640, 640)
        b = geo.footprint_bounds(fp)
        # east-west ground meters at the center latitude
        width_m = (
            math.radians(b.east - b.west)
            * geo.EARTH_RADIUS_M
            * math.cos(math.radians(39.7))
        )
        assert width_m == pytest.approx(640 * fp.gsd_m_per_px, rel=1e-6)
        assert width_m == pytest.approx(73.5, abs=0.2)

    def test_adjacent_grid_centers_abut(self):
        res = geo.mercator_resolution(20)
        x, y = geo.mercator_xy(GeoPoint(-105.0, 39.7))
        f1 = ImageFootprint(geo.mercator_point(x, y), 20, 640, 640)
        f2 = ImageFootprint(geo.mercator_point(x + 640 * res, y), 20, 640, 640)
        b1, b2 = geo.footprint_bounds(f1), geo.footprint_bounds(f2)
        assert b1.east == pytest.approx(b2.west, abs=1e-12)

    def test_mercator_limit(self):
        fp = ImageFootprint(GeoPoint(0.0, 86.0), 20, 640, 640)
        with pytest.raises(ValueError):
            geo.footprint_bounds(fp)

    def test_gsd_cached(self):
        fp = ImageFootprint(GeoPoint(-105.0, 39.7), 20, 640, 640)
        assert fp.gsd_m_per_px == geo.ground_resolution(39.7, 20)


def square_block(lon0, lat0, width_tiles, height_tiles, zoom=20, px=640, shrink=0.0):
    """BlockUnit whose Mercator bbox spans exactly the given tile counts."""
    res = geo.mercator_resolution(zoom)
    x0, y0 = geo.mercator_xy(GeoPoint(lon0, lat0))
    w = width_tiles * px * res * (1.0 - shrink)
    h = height_tiles * px * res * (1.0 - shrink)
    corners = [
        geo.mercator_point(x0, y0),
        geo.mercator_point(x0 + w, y0),
        geo.mercator_point(x0 + w, y0 + h),
        geo.mercator_point(x0, y0 + h),
    ]
    poly = Polygon(tuple(corners))
    return BlockUnit("080010001001", poly, 100)


class TestPlanTiles:
    def test_polygon_inside_one_footprint(self):
        unit = square_block(-105.0, 39.7, 1, 1, shrink=0.9)
        plan = geo.plan_tiles(unit, 20)
        assert len(plan.footprints) == 1

    def test_rectangle_spanning_2x2(self):
        unit = square_block(-105.0, 39.7, 2, 2)
        plan = geo.plan_tiles(unit, 20)
        assert len(plan.footprints) == 4

    def test_row_major_north_to_south(self):
        unit = square_block(-105.0, 39.7, 2, 2)
        fps = geo.plan_tiles(unit, 20).footprints
        lats = [fp.center.lat for fp in fps]
        lons = [fp.center.lon for fp in fps]
        assert lats[0] == lats[1] and lats[0] > lats[2]
        assert lons[0] < lons[1]

    def test_every_footprint_intersects_and_vertices_covered(self):
        # L-shaped unit: the far corner tile of the bbox must be dropped
        res = geo.mercator_resolution(18)
        x0, y0 = geo.mercator_xy(GeoPoint(-105.0, 39.7))
        s = 640 * res
        coords = [(0, 0), (2 * s, 0), (2 * s, 0.9 * s), (0.9 * s, 0.9 * s), (0.9 * s, 2 * s), (0, 2 * s)]
        pts = [geo.mercator_point(x0 + dx, y0 + dy) for dx, dy in coords]
        unit = BlockUnit("bg", Polygon(tuple(pts)), 10)
        plan = geo.plan_tiles(unit, 18)
        assert len(plan.footprints) == 3  # 2x2 grid minus the empty corner
        bounds = [geo.footprint_bounds(fp) for fp in plan.footprints]
        eps = 1e-9  # degrees; float-representation slack (~0.1 mm)
        for v in unit.geometry.exterior:
            assert any(
                b.west - eps <= v.lon <= b.east + eps and b.south - eps <= v.lat <= b.north + eps
                for b in bounds
            )

    def test_tiles_abut_without_gaps(self):
        unit = square_block(-105.0, 39.7, 3, 2)
        fps = geo.plan_tiles(unit, 20).footprints
        assert len(fps) == 6
        b = [geo.footprint_bounds(fp) for fp in fps]
        assert b[0].east == pytest.approx(b[1].west, abs=1e-11)
        assert b[0].south == pytest.approx(b[3].north, abs=1e-11)


class TestSelectPopulated:
    def test_all_positive_identity(self):
        units = [square_block(-105, 39.7, 1, 1) for _ in range(3)]
        assert geo.select_populated(units) == units

    def test_filters_zero_population(self):
        mk = lambda pop: BlockUnit("g", square_block(-105, 39.7, 1, 1).geometry, pop)
        units = [mk(0), mk(5), mk(0), mk(1)]
        kept = geo.select_populated(units)
        assert [u.population for u in kept] == [5, 1]


class TestAreas:
    def test_square_100m(self):
        sq = meters_square(39.7, -105.0, 100.0)
        assert geo.polygon_area_m2(sq) == pytest.approx(10_000.0, rel=1e-3)

    def test_triangle_half_base_height(self):
        R = geo.EARTH_RADIUS_M
        lat0, lon0 = 39.7, -105.0
        dlat = math.degrees(1000.0 / R)
        dlon = math.degrees(1000.0 / (R * math.cos(math.radians(lat0))))
        tri = Polygon.from_coords([(lon0, lat0), (lon0 + dlon, lat0), (lon0, lat0 + dlat)])
        assert geo.polygon_area_m2(tri) == pytest.approx(5e5, rel=1e-3)

    def test_hole_subtracted(self):
        outer = meters_square(39.7, -105.0, 100.0)
        inner = meters_square(39.7, -105.0, 50.0, offset_x=25.0, offset_y=25.0)
        poly = Polygon(outer.exterior, (inner.exterior,))
        assert geo.polygon_area_m2(poly) == pytest.approx(7500.0, rel=2e-3)

    def test_hole_equal_to_exterior_errors(self):
        sq = meters_square(39.7, -105.0, 100.0)
        degenerate = Polygon(sq.exterior, (sq.exterior,))
        with pytest.raises(ValueError):
            geo.polygon_area_m2(degenerate)

    @given(side=st.floats(10.0, 10_000.0), lat=st.floats(-60.0, 60.0))
    @settings(max_examples=40, deadline=None)
    def test_square_area_within_point2_percent(self, side, lat):
        sq = meters_square(lat, 12.3, side)
        assert geo.polygon_area_m2(sq) / side**2 == pytest.approx(1.0, rel=2e-3)


class TestIntersectionArea:
    def test_self_intersection_is_area(self):
        sq = meters_square(39.7, -105.0, 100.0)
        assert geo.intersection_area_m2(sq, sq) == geo.polygon_area_m2(sq)

    def test_disjoint_squares(self):
        a = meters_square(39.7, -105.0, 100.0)
        b = meters_square(39.7, -105.0, 100.0, offset_x=500.0)
        assert geo.intersection_area_m2(a, b) == 0.0

    def test_half_offset_overlap(self):
        a = meters_square(39.7, -105.0, 100.0)
        b = meters_square(39.7, -105.0, 100.0, offset_x=50.0, offset_y=50.0)
        area = geo.intersection_area_m2(a, b)
        assert area == pytest.approx(2500.0, rel=2e-3)
        assert area == pytest.approx(0.25 * geo.polygon_area_m2(a), rel=2e-3)

    def test_exactly_symmetric(self):
        a = meters_square(39.7, -105.0, 120.0)
        b = meters_square(39.7, -105.0, 80.0, offset_x=30.0, offset_y=-10.0)
        assert geo.intersection_area_m2(a, b) == geo.intersection_area_m2(b, a)

    def test_bounded_by_min_area(self):
        a = meters_square(39.7, -105.0, 100.0)
        b = meters_square(39.7, -105.0, 30.0, offset_x=10.0, offset_y=10.0)
        inter = geo.intersection_area_m2(a, b)
        assert inter <= min(geo.polygon_area_m2(a), geo.polygon_area_m2(b))
        assert inter == pytest.approx(geo.polygon_area_m2(b), rel=1e-9)


class TestGeoJson:
    def test_roundtrip_and_multipolygon_explode(self, tmp_path):
        fc = {
            "type": "FeatureCollection",
            "features": [
                {
                    "type": "Feature",
                    "properties": {"geoid": "08001", "population": 12},
                    "geometry": {
                        "type": "Polygon",
                        "coordinates": [[[0, 0], [1, 0], [1, 1], [0, 1], [0, 0]]],
                    },
                },
                {
                    "type": "Feature",
                    "properties": {"geoid": "08002", "population": 3},
                    "geometry": {
                        "type": "MultiPolygon",
                        "coordinates": [
                            [[[2, 0], [3, 0], [3, 1], [2, 1], [2, 0]]],
                            [[[4, 0], [5, 0], [5, 1], [4, 1], [4, 0]]],
                        ],
                    },
                },
            ],
        }
        path = tmp_path / "blocks.geojson"
        import json

        path.write_text(json.dumps(fc))
        units = geo.read_block_units(path)
        assert [u.geoid for u in units] == ["08001", "08002", "08002"]
        assert units[1].population == 3

    def test_missing_geoid(self):
        fc = {
            "type": "FeatureCollection",
            "features": [
                {
                    "type": "Feature",
                    "properties": {"population": 1},
                    "geometry": {
                        "type": "Polygon",
                        "coordinates": [[[0, 0], [1, 0], [1, 1], [0, 1]]],
                    },
                }
            ],
        }
        with pytest.raises(ValueError):
            geo.read_block_units(fc)
