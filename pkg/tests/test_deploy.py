import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roofpv import deploy
from roofpv.deploy import (
    BlockGroupDeployment,
    ImageObservation,
    image_contribution,
    merge_pv_systems,
    observation_from_boxes,
    pv_count_per_hh,
    pv_to_roof_ratio,
    rollup,
)
from roofpv.detect import BBox, BoxClass


def roof(x0, y0, x1, y1, score=1.0):
    return BBox(x0, y0, x1, y1, cls=BoxClass.ROOF, score=score)


def pv(x0, y0, x1, y1, score=1.0):
    return BBox(x0, y0, x1, y1, cls=BoxClass.PV, score=score)


def obs(image_id, bg, roofs=(), pvs=(), gsd=0.1):
    return ImageObservation(image_id, bg, tuple(roofs), tuple(pvs), gsd)


class TestImageContribution:
    def test_pv_without_roofs_excluded(self):
        o = obs("i", "b", roofs=(), pvs=(pv(0, 0, 5, 5), pv(10, 10, 12, 12), pv(20, 20, 22, 22)))
        c = image_contribution(o)
        assert (c.pv_count, c.pv_area_m2, c.roof_area_m2) == (0, 0.0, 0.0)

    def test_roofs_only(self):
        o = obs("i", "b", roofs=(roof(0, 0, 10, 10), roof(20, 0, 30, 10)), gsd=0.1)
        c = image_contribution(o)
        assert c.pv_count == 0 and c.pv_area_m2 == 0.0
        assert c.roof_area_m2 == pytest.approx(2 * 100 * 0.01)

    def test_one_roof_one_pv(self):
        o = obs("i", "b", roofs=(roof(0, 0, 10, 10),), pvs=(pv(1, 1, 6, 11),), gsd=0.1)
        c = image_contribution(o)
        assert c.pv_count == 1
        assert c.pv_area_m2 == pytest.approx(50 * 0.01)
        assert c.roof_area_m2 == pytest.approx(100 * 0.01)

    def test_wrong_class_in_roof_slot_rejected(self):
        with pytest.raises(ValueError):
            obs("i", "b", roofs=(pv(0, 0, 1, 1),))

    def test_nonpositive_gsd_rejected(self):
        with pytest.raises(ValueError):
            obs("i", "b", gsd=0.0)


class TestMergeSystems:
    def test_disjoint_boxes_counted_separately(self):
        boxes = (pv(0, 0, 2, 2), pv(10, 10, 12, 12), pv(20, 0, 22, 2))
        assert merge_pv_systems(boxes) == 3

    def test_touching_boxes_merge(self):
        boxes = (pv(0, 0, 2, 2), pv(2, 0, 4, 2), pv(10, 10, 12, 12))
        assert merge_pv_systems(boxes, eps_px=0.0) == 2

    def test_eps_bridges_gaps(self):
        boxes = (pv(0, 0, 2, 2), pv(2.5, 0, 4.5, 2))
        assert merge_pv_systems(boxes, eps_px=0.0) == 2
        assert merge_pv_systems(boxes, eps_px=0.3) == 1

    def test_contribution_modes(self):
        o = obs("i", "b", roofs=(roof(0, 0, 40, 40),),
                pvs=(pv(1, 1, 3, 3), pv(3, 1, 5, 3)), gsd=1.0)
        assert image_contribution(o).pv_count == 2
        assert image_contribution(o, merge_eps=0.0).pv_count == 1


class TestRatios:
    def test_count_per_hh(self):
        contribs = [
            image_contribution(obs("1", "b", roofs=(roof(0, 0, 10, 10),),
                                   pvs=(pv(0, 0, 2, 2), pv(5, 5, 7, 7)))),
            image_contribution(obs("2", "b", roofs=(roof(0, 0, 10, 10),))),
            image_contribution(obs("3", "b", roofs=(roof(0, 0, 10, 10),), pvs=(pv(0, 0, 2, 2),))),
        ]
        assert pv_count_per_hh(contribs, 10) == pytest.approx(0.3)
        assert pv_count_per_hh(contribs, 100) == pytest.approx(0.03)

    def test_seven_systems_hundred_households(self):
        contribs = [
            image_contribution(obs(str(i), "b", roofs=(roof(0, 0, 10, 10),), pvs=(pv(0, 0, 2, 2),)))
            for i in range(7)
        ]
        assert pv_count_per_hh(contribs, 100) == pytest.approx(0.07)

    def test_households_must_be_positive(self):
        with pytest.raises(ValueError):
            pv_count_per_hh([], 0)

    def test_ratio_of_sums(self):
        c1 = image_contribution(obs("1", "b", roofs=(roof(0, 0, 10, 5),), pvs=(pv(0, 0, 1, 1),), gsd=1.0))
        c2 = image_contribution(obs("2", "b", roofs=(roof(0, 0, 10, 7),), pvs=(pv(0, 0, 2, 1),), gsd=1.0))
        assert (c1.pv_area_m2, c2.pv_area_m2) == (1.0, 2.0)
        assert (c1.roof_area_m2, c2.roof_area_m2) == (50.0, 70.0)
        assert pv_to_roof_ratio([c1, c2]) == pytest.approx(3.0 / 120.0)

    def test_zero_roof_area_is_error(self):
        with pytest.raises(ValueError):
            pv_to_roof_ratio([image_contribution(obs("1", "b"))])

    def test_full_coverage_limit(self):
        c = image_contribution(obs("1", "b", roofs=(roof(0, 0, 4, 4),), pvs=(pv(0, 0, 4, 4),)))
        assert pv_to_roof_ratio([c]) == 1.0

    @given(scale=st.floats(0.01, 100.0))
    @settings(max_examples=30, deadline=None)
    def test_ratio_invariant_to_area_scaling(self, scale):
        base = [
            obs("1", "b", roofs=(roof(0, 0, 10, 5),), pvs=(pv(0, 0, 2, 2),), gsd=1.0),
            obs("2", "b", roofs=(roof(0, 0, 8, 8),), pvs=(pv(0, 0, 1, 3),), gsd=1.0),
        ]
        scaled = [
            ImageObservation(o.image_id, o.block_group_id, o.roof_boxes, o.pv_boxes, o.gsd_m_per_px * scale)
            for o in base
        ]
        r0 = pv_to_roof_ratio([image_contribution(o) for o in base])
        r1 = pv_to_roof_ratio([image_contribution(o) for o in scaled])
        assert r1 == pytest.approx(r0, rel=1e-12)

    def test_count_additive_over_partitions(self):
        all_obs = [
            obs(str(i), "b", roofs=(roof(0, 0, 10, 10),), pvs=(pv(0, 0, 2, 2),) * (i % 2))
            for i in range(6)
        ]
        full = sum(image_contribution(o).pv_count for o in all_obs)
        part = sum(image_contribution(o).pv_count for o in all_obs[:3]) + sum(
            image_contribution(o).pv_count for o in all_obs[3:]
        )
        assert full == part


class TestRollup:
    def test_single_group_single_image(self):
        o = obs("1", "bg1", roofs=(roof(0, 0, 10, 10),), pvs=(pv(0, 0, 5, 5),), gsd=0.5)
        records, issues = rollup([o], {"bg1": 4})
        assert issues == []
        r = records[0]
        c = image_contribution(o)
        assert r == BlockGroupDeployment("bg1", 1, 4, c.pv_area_m2, c.roof_area_m2,
                                         0.25, c.pv_area_m2 / c.roof_area_m2)

    def test_missing_household_flagged_run_continues(self):
        o1 = obs("1", "bg1", roofs=(roof(0, 0, 10, 10),))
        o2 = obs("2", "bg2", roofs=(roof(0, 0, 10, 10),))
        records, issues = rollup([o1, o2], {"bg2": 5})
        assert [r.block_group_id for r in records] == ["bg2"]
        assert issues[0].block_group_id == "bg1"

    def test_zero_roof_area_flagged_ratio_none(self):
        o = obs("1", "bg1", pvs=())
        records, issues = rollup([o], {"bg1": 3})
        assert records[0].pv_to_roof_ratio is None
        assert any("ratio undefined" in i.reason for i in issues)

    def test_order_independence(self):
        os1 = [
            obs("1", "bgB", roofs=(roof(0, 0, 10, 10),), pvs=(pv(0, 0, 2, 2),)),
            obs("2", "bgA", roofs=(roof(0, 0, 8, 8),)),
        ]
        hh = {"bgA": 2, "bgB": 3}
        r_fwd, _ = rollup(os1, hh)
        r_rev, _ = rollup(list(reversed(os1)), hh)
        assert r_fwd == r_rev
        assert [r.block_group_id for r in r_fwd] == ["bgA", "bgB"]


class TestObservationIO:
    def test_nms_applied_on_read(self, tmp_path):
        # two overlapping roofs (IoU 0.5 > 0.2): reader suppresses one
        boxes = [roof(0, 0, 2, 1, 0.9), roof(0, 0, 1, 1, 0.8), pv(0.2, 0.2, 0.6, 0.6, 0.7)]
        path = tmp_path / "obs.jsonl"
        deploy.write_observations_jsonl(path, [("img1", "bg1", 0.1, boxes)])
        out = deploy.read_observations_jsonl(path)
        assert len(out[0].roof_boxes) == 1
        assert len(out[0].pv_boxes) == 1
        raw = deploy.read_observations_jsonl(path, apply_nms=False)
        assert len(raw[0].roof_boxes) == 2

    def test_deployment_csv_roundtrip(self, tmp_path):
        records = [
            BlockGroupDeployment("a", 2, 10, 1.5, 30.0, 0.2, 0.05),
            BlockGroupDeployment("b", 0, 5, 0.0, 0.0, 0.0, None),
        ]
        path = tmp_path / "deploy.csv"
        deploy.write_deployment_csv(path, records)
        assert deploy.read_deployment_csv(path) == records

    def test_observation_from_boxes_splits_classes(self):
        o = observation_from_boxes("i", "b", 0.1, [roof(0, 0, 1, 1), pv(0, 0, 0.5, 0.5)],
                                   apply_nms=False)
        assert len(o.roof_boxes) == 1 and len(o.pv_boxes) == 1
