import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracle_eval import reference_report
from roofpv import detect
from roofpv.detect import (
    BBox,
    BoxClass,
    DetectionSet,
    EvalConfig,
    GroundTruthBox,
    average_precision,
    eval_report,
    iou,
    match_detections,
    nms,
)


def roof(x0, y0, x1, y1, score=1.0):
    return BBox(x0, y0, x1, y1, cls=BoxClass.ROOF, score=score)


def pv(x0, y0, x1, y1, score=1.0):
    return BBox(x0, y0, x1, y1, cls=BoxClass.PV, score=score)


def rasterized_iou(a, b, cell=0.05):
    """Count-cells oracle on a lattice both boxes are aligned to."""
    x_lo = min(a[0], b[0])
    y_lo = min(a[1], b[1])
    x_hi = max(a[2], b[2])
    y_hi = max(a[3], b[3])
    nx = int(round((x_hi - x_lo) / cell))
    ny = int(round((y_hi - y_lo) / cell))
    xs = x_lo + cell * (np.arange(nx) + 0.5)
    ys = y_lo + cell * (np.arange(ny) + 0.5)
    gx, gy = np.meshgrid(xs, ys)
    in_a = (gx > a[0]) & (gx < a[2]) & (gy > a[1]) & (gy < a[3])
    in_b = (gx > b[0]) & (gx < b[2]) & (gy > b[1]) & (gy < b[3])
    union = np.logical_or(in_a, in_b).sum()
    if union == 0:
        return 0.0
    return np.logical_and(in_a, in_b).sum() / union


def greedy_nms_oracle(boxes, thresholds):
    """Per-class sort-and-scan, written directly from the rule."""
    kept = []
    for cls in (BoxClass.ROOF, BoxClass.PV):
        idxs = [i for i, b in enumerate(boxes) if b.cls is cls]
        idxs.sort(key=lambda i: (-boxes[i].score, i))
        chosen = []
        for i in idxs:
            if all(iou(boxes[i], boxes[j]) <= thresholds[cls] for j in chosen):
                chosen.append(i)
        kept.extend(chosen)
    return sorted(kept)


def lattice_box(rng, span=20.0, cell=0.05):
    n = int(span / cell)
    x0, y0 = rng.integers(0, n - 2, size=2)
    w, h = rng.integers(1, n - 1, size=2)
    x1 = min(n, x0 + w)
    y1 = min(n, y0 + h)
    return (x0 * cell, y0 * cell, x1 * cell, y1 * cell)


class TestIoU:
    def test_identical(self):
        a = roof(0, 0, 2, 2)
        assert iou(a, a) == 1.0

    def test_disjoint(self):
        assert iou(roof(0, 0, 1, 1), roof(5, 5, 6, 6)) == 0.0

    def test_one_seventh(self):
        a, b = roof(0, 0, 2, 2), roof(1, 1, 3, 3)
        assert iou(a, b) == pytest.approx(1 / 7, abs=1e-12)
        assert rasterized_iou((0, 0, 2, 2), (1, 1, 3, 3)) == pytest.approx(1 / 7, abs=1e-9)

    def test_matches_rasterization_on_random_lattice_boxes(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            a = lattice_box(rng)
            b = lattice_box(rng)
            fast = iou(roof(*a), roof(*b))
            assert fast == pytest.approx(rasterized_iou(a, b), abs=1e-3)

    @given(
        ax=st.floats(0, 50), ay=st.floats(0, 50), aw=st.floats(0.1, 20), ah=st.floats(0.1, 20),
        bx=st.floats(0, 50), by=st.floats(0, 50), bw=st.floats(0.1, 20), bh=st.floats(0.1, 20),
    )
    @settings(max_examples=60, deadline=None)
    def test_symmetric_and_bounded(self, ax, ay, aw, ah, bx, by, bw, bh):
        a = roof(ax, ay, ax + aw, ay + ah)
        b = roof(bx, by, bx + bw, by + bh)
        assert iou(a, b) == iou(b, a)
        assert 0.0 <= iou(a, b) <= 1.0


class TestNMS:
    def test_single_box(self):
        ds = DetectionSet("img", [roof(0, 0, 10, 10, 0.8)])
        assert nms(ds).boxes == ds.boxes

    def test_overlapping_roofs_suppressed(self):
        # IoU 0.5 > roof threshold 0.2: only the higher score survives
        a = roof(0, 0, 2, 1, 0.9)
        b = roof(0, 0, 1, 1, 0.8)
        assert iou(a, b) == 0.5
        out = nms(DetectionSet("img", [b, a]))
        assert out.boxes == [a]

    def test_low_overlap_pvs_both_kept(self):
        a = pv(0, 0, 10, 10, 0.3)
        b = pv(9.1, 0, 19.1, 10, 0.9)
        assert iou(a, b) < 0.1
        out = nms(DetectionSet("img", [a, b]))
        assert sorted(out.boxes, key=lambda x: x.xmin) == [a, b]

    def test_classes_do_not_suppress_each_other(self):
        a = roof(0, 0, 10, 10, 0.9)
        b = pv(0, 0, 10, 10, 0.8)
        assert len(nms(DetectionSet("img", [a, b])).boxes) == 2

    def test_equal_scores_keep_earlier_input(self):
        a = roof(0, 0, 10, 10, 0.5)
        b = roof(1, 0, 11, 10, 0.5)
        out = nms(DetectionSet("img", [a, b]))
        assert out.boxes == [a]

    def test_matches_greedy_oracle_on_random_scenes(self):
        rng = np.random.default_rng(123)
        thresholds = dict(detect.DEFAULT_NMS_THRESHOLDS)
        for _ in range(1000):
            n = int(rng.integers(1, 11))
            boxes = []
            for _ in range(n):
                coords = lattice_box(rng)
                cls = BoxClass.ROOF if rng.random() < 0.5 else BoxClass.PV
                score = float(rng.integers(1, 100)) / 100.0
                boxes.append(BBox(*coords, cls=cls, score=score))
            out = nms(DetectionSet("img", boxes), thresholds)
            kept = sorted(boxes.index(b) for b in out.boxes)
            assert kept == greedy_nms_oracle(boxes, thresholds)

    def test_output_subset_and_no_overlap_above_threshold(self):
        rng = np.random.default_rng(5)
        boxes = [
            BBox(*lattice_box(rng), cls=BoxClass.ROOF, score=float(rng.random()))
            for _ in range(8)
        ]
        out = nms(DetectionSet("img", boxes))
        assert all(b in boxes for b in out.boxes)
        for i, a in enumerate(out.boxes):
            for b in out.boxes[i + 1 :]:
                if a.cls is b.cls:
                    assert iou(a, b) <= detect.DEFAULT_NMS_THRESHOLDS[a.cls]


class TestMatching:
    def test_exact_hit(self):
        dets = DetectionSet("img", [roof(0, 0, 10, 10, 0.9)])
        gts = [GroundTruthBox(0, 0, 10, 10, cls=BoxClass.ROOF)]
        res = match_detections(dets, gts, 0.5)
        assert res.matches[0].matched_gt == 0
        assert res.unmatched_gt == 0

    def test_two_detections_one_gt(self):
        hi = roof(0, 0, 10, 10, 0.9)
        lo = roof(0.5, 0, 10.5, 10, 0.8)
        gts = [GroundTruthBox(0, 0, 10, 10, cls=BoxClass.ROOF)]
        res = match_detections(DetectionSet("img", [lo, hi]), gts, 0.5)
        by_idx = {m.det_index: m.matched_gt for m in res.matches}
        assert by_idx[1] == 0  # higher score wins the truth box
        assert by_idx[0] is None
        assert res.unmatched_gt == 0

    def test_wrong_class_is_fp_and_miss(self):
        dets = DetectionSet("img", [pv(0, 0, 10, 10, 0.9)])
        gts = [GroundTruthBox(0, 0, 10, 10, cls=BoxClass.ROOF)]
        res = match_detections(dets, gts, 0.5)
        assert res.matches[0].matched_gt is None
        assert res.unmatched_gt == 1

    def test_highest_iou_gt_preferred(self):
        d = roof(0, 0, 10, 10, 0.9)
        gts = [
            GroundTruthBox(4, 0, 14, 10, cls=BoxClass.ROOF),
            GroundTruthBox(1, 0, 11, 10, cls=BoxClass.ROOF),
        ]
        res = match_detections(DetectionSet("img", [d]), gts, 0.3)
        assert res.matches[0].matched_gt == 1


class TestAveragePrecision:
    def test_perfect(self):
        flags = [(0.9, "a", 0, True), (0.8, "a", 1, True)]
        assert average_precision(flags, 2) == 1.0

    def test_no_detections(self):
        assert average_precision([], 3) == 0.0

    def test_no_ground_truth_sentinel(self):
        assert average_precision([(0.5, "a", 0, False)], 0) == -1.0

    def test_tp_then_fp_full_recall_first(self):
        flags = [(0.9, "a", 0, True), (0.8, "a", 1, False)]
        assert average_precision(flags, 1) == 1.0

    def test_fp_then_tp(self):
        # precision at full recall is 1/2; envelope gives 0.5 everywhere
        flags = [(0.9, "a", 0, False), (0.8, "a", 1, True)]
        ap = average_precision(flags, 1)
        assert ap == pytest.approx(0.5, abs=1e-9)

    def test_removing_fp_never_decreases_ap(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            n = int(rng.integers(2, 12))
            flags = [
                (float(rng.random()), "a", i, bool(rng.random() < 0.5)) for i in range(n)
            ]
            n_gt = max(1, sum(f[3] for f in flags))
            base = average_precision(flags, n_gt)
            fps = [i for i, f in enumerate(flags) if not f[3]]
            if not fps:
                continue
            drop = fps[int(rng.integers(0, len(fps)))]
            pruned = [f for i, f in enumerate(flags) if i != drop]
            assert average_precision(pruned, n_gt) >= base - 1e-12


def _random_corpus(seed, n_images=4, boxes_per_image=5, jitter=3.0):
    """Seeded corpus of ground truth + jittered detections (lattice-free)."""
    rng = np.random.default_rng(seed)
    gts = {}
    det_sets = []
    for i in range(n_images):
        img = f"im{i}"
        g_list = []
        d_list = []
        for _ in range(boxes_per_image):
            cls = BoxClass.ROOF if rng.random() < 0.6 else BoxClass.PV
            x0, y0 = rng.uniform(0, 300, size=2)
            w, h = rng.uniform(8, 120, size=2)
            g_list.append(GroundTruthBox(x0, y0, x0 + w, y0 + h, cls=cls))
            if rng.random() < 0.85:  # detection with jitter
                dx = rng.normal(0, jitter, size=4)
                d_list.append(
                    BBox(
                        x0 + dx[0], y0 + dx[1],
                        max(x0 + w + dx[2], x0 + dx[0] + 1.0),
                        max(y0 + h + dx[3], y0 + dx[1] + 1.0),
                        cls=cls, score=float(rng.uniform(0.2, 1.0)),
                    )
                )
        if rng.random() < 0.7:  # spurious detection
            x0, y0 = rng.uniform(0, 300, size=2)
            d_list.append(BBox(x0, y0, x0 + 30, y0 + 20,
                               cls=BoxClass.ROOF if rng.random() < 0.5 else BoxClass.PV,
                               score=float(rng.uniform(0.2, 1.0))))
        gts[img] = g_list
        det_sets.append(DetectionSet(img, d_list))
    return det_sets, gts


def _as_plain(det_sets, gts):
    dets = []
    for ds in det_sets:
        for b in ds.boxes:
            dets.append({"image_id": ds.image_id, "cls": b.cls.value, "score": b.score,
                         "bbox": (b.xmin, b.ymin, b.xmax, b.ymax)})
    gt = []
    for img, lst in gts.items():
        for g in lst:
            gt.append({"image_id": img, "cls": g.cls.value, "bbox": (g.xmin, g.ymin, g.xmax, g.ymax)})
    return dets, gt


class TestEvalReport:
    def test_matches_reference_evaluator(self):
        det_sets, gts = _random_corpus(seed=20, n_images=4, boxes_per_image=5)
        report = eval_report(det_sets, gts)
        ref_cells, ref_ap50 = reference_report(*_as_plain(det_sets, gts))
        for key, ref_value in ref_cells.items():
            assert report.cells[key] == pytest.approx(ref_value, abs=1e-6), key
        for cls, v in ref_ap50.items():
            assert report.per_class_ap50[cls] == pytest.approx(v, abs=1e-6)

    def test_perfect_detector_all_ones(self):
        rng = np.random.default_rng(1)
        gts = {}
        det_sets = []
        sizes = [20.0, 60.0, 150.0]  # small / medium / large per image
        for i in range(6):
            img = f"im{i}"
            s = sizes[i % 3]
            x0, y0 = rng.uniform(0, 400, size=2)
            g = [
                GroundTruthBox(x0, y0, x0 + s, y0 + s, cls=BoxClass.ROOF),
            ]
            # one PV per image keeps max_dets=1 recall exact per class
            x1, y1 = rng.uniform(500, 900, size=2)
            g.append(GroundTruthBox(x1, y1, x1 + s, y1 + s, cls=BoxClass.PV))
            gts[img] = g
            det_sets.append(DetectionSet(img, [
                BBox(b.xmin, b.ymin, b.xmax, b.ymax, cls=b.cls, score=1.0) for b in g
            ]))
        report = eval_report(det_sets, gts)
        for key, value in report.cells.items():
            assert value == pytest.approx(1.0), key

    def test_empty_detector_ap_zero(self):
        _, gts = _random_corpus(seed=4)
        det_sets = [DetectionSet(img, []) for img in gts]
        report = eval_report(det_sets, gts)
        assert report.cells[("AP", "0.50:0.95", "all", 100)] == 0.0
        assert report.cells[("AP", "0.50", "all", 100)] == 0.0

    def test_empty_corpus_errors(self):
        with pytest.raises(ValueError):
            eval_report([], {})

    def test_ar_monotone_in_max_dets(self):
        det_sets, gts = _random_corpus(seed=9, n_images=3, boxes_per_image=6)
        report = eval_report(det_sets, gts)
        rng_label = report.config.iou_range_label
        ar1 = report.cells[("AR", rng_label, "all", 1)]
        ar10 = report.cells[("AR", rng_label, "all", 10)]
        ar100 = report.cells[("AR", rng_label, "all", 100)]
        assert ar1 <= ar10 + 1e-12 <= ar100 + 2e-12

    def test_values_in_unit_interval_or_sentinel(self):
        det_sets, gts = _random_corpus(seed=11)
        report = eval_report(det_sets, gts)
        for v in report.cells.values():
            assert v == -1.0 or 0.0 <= v <= 1.0


class TestCocoText:
    def test_twelve_lines_exact_format(self):
        det_sets, gts = _random_corpus(seed=20)
        report = eval_report(det_sets, gts)
        lines = report.coco_summary_lines()
        assert len(lines) == 12
        assert lines[0].startswith(" Average Precision  (AP) @[ IoU=0.50:0.95 | area=   all | maxDets=100 ] = ")
        assert lines[1].startswith(" Average Precision  (AP) @[ IoU=0.50      | area=   all | maxDets=100 ] = ")
        assert lines[6].startswith(" Average Recall     (AR) @[ IoU=0.50:0.95 | area=   all | maxDets=  1 ] = ")
        for line in lines:
            assert len(line.split(" = ")) == 2
            value = line.split(" = ")[1]
            assert len(value) in (5, 6)  # 0.661 or -1.000

    def test_full_block_byte_exact_for_perfect_corpus(self):
        gts = {"im0": [GroundTruthBox(0, 0, 50, 50, cls=BoxClass.ROOF),
                       GroundTruthBox(100, 100, 150, 150, cls=BoxClass.PV)]}
        det_sets = [DetectionSet("im0", [
            roof(0, 0, 50, 50, 1.0), pv(100, 100, 150, 150, 1.0)])]
        text = eval_report(det_sets, gts).coco_text()
        expected = (
            "IoU metric: bbox\n"
            " Average Precision  (AP) @[ IoU=0.50:0.95 | area=   all | maxDets=100 ] = 1.000\n"
            " Average Precision  (AP) @[ IoU=0.50      | area=   all | maxDets=100 ] = 1.000\n"
            " Average Precision  (AP) @[ IoU=0.75      | area=   all | maxDets=100 ] = 1.000\n"
            " Average Precision  (AP) @[ IoU=0.50:0.95 | area= small | maxDets=100 ] = -1.000\n"
            " Average Precision  (AP) @[ IoU=0.50:0.95 | area=medium | maxDets=100 ] = 1.000\n"
            " Average Precision  (AP) @[ IoU=0.50:0.95 | area= large | maxDets=100 ] = -1.000\n"
            " Average Recall     (AR) @[ IoU=0.50:0.95 | area=   all | maxDets=  1 ] = 1.000\n"
            " Average Recall     (AR) @[ IoU=0.50:0.95 | area=   all | maxDets= 10 ] = 1.000\n"
            " Average Recall     (AR) @[ IoU=0.50:0.95 | area=   all | maxDets=100 ] = 1.000\n"
            " Average Recall     (AR) @[ IoU=0.50:0.95 | area= small | maxDets=100 ] = -1.000\n"
            " Average Recall     (AR) @[ IoU=0.50:0.95 | area=medium | maxDets=100 ] = 1.000\n"
            " Average Recall     (AR) @[ IoU=0.50:0.95 | area= large | maxDets=100 ] = -1.000\n"
        )
        assert text == expected


class TestJsonl:
    def test_detection_roundtrip(self, tmp_path):
        det_sets, gts = _random_corpus(seed=2)
        dpath = tmp_path / "dets.jsonl"
        gpath = tmp_path / "gt.jsonl"
        detect.write_detections_jsonl(dpath, det_sets)
        detect.write_groundtruth_jsonl(gpath, gts)
        back = detect.read_detections_jsonl(dpath)
        assert [ds.image_id for ds in back] == [ds.image_id for ds in det_sets]
        assert all(a.boxes == b.boxes for a, b in zip(back, det_sets))
        gback = detect.read_groundtruth_jsonl(gpath)
        assert gback == gts

    def test_gt_lines_have_no_score(self, tmp_path):
        import json

        gpath = tmp_path / "gt.jsonl"
        detect.write_groundtruth_jsonl(
            gpath, {"im": [GroundTruthBox(0, 0, 5, 5, cls=BoxClass.ROOF)]}
        )
        rec = json.loads(gpath.read_text().splitlines()[0])
        assert set(rec) == {"image_id", "class", "bbox"}
