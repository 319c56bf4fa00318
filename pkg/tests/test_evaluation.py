import math

import numpy as np
import pytest

from mono3d.errors import EvaluationError, ValidationError
from mono3d.evaluation import (DIFFICULTIES, EvalConfig, GtStatus,
                               ads, ads_from_matches, aos, average_precision,
                               default_iou_threshold, detection_order,
                               difficulty_filter, evaluate_frames, match_frame,
                               occlusion_split, render_table, result_sampling,
                               score_thresholds)
from mono3d.geom3d import wrap_angle
from mono3d.kitti_io import ObjectLabel
from mono3d.synthetic import random_fixture

from reference_eval import ref_metrics


def make_label(class_name="Car", bbox=(100.0, 100.0, 200.0, 150.0),
               loc=(0.0, 1.0, 20.0), dims=(1.5, 1.6, 3.9), yaw=0.0,
               alpha=None, occlusion=0, truncation=0.0, score=None):
    if alpha is None:
        alpha = wrap_angle(yaw - math.atan2(loc[0], loc[2]))
    return ObjectLabel(class_name, truncation, occlusion, alpha, bbox,
                       dims, loc, yaw, score)


# ---------------------------------------------------------------------------
# score thresholds


def test_score_thresholds_frozen():
    scores = [0.9, 0.8, 0.7, 0.6]
    assert score_thresholds(scores, 4, 4) == [0.9, 0.8, 0.7, 0.6]
    assert score_thresholds(scores, 4, 2) == [0.8, 0.6]
    # more gt than TPs: the tail recalls are unreachable
    assert score_thresholds(scores, 8, 4) == [0.8, 0.6]
    assert score_thresholds([], 5, 4) == []
    # order of the input does not matter
    assert score_thresholds([0.6, 0.9, 0.7, 0.8], 4, 4) == [0.9, 0.8, 0.7, 0.6]


def test_score_thresholds_errors():
    with pytest.raises(EvaluationError):
        score_thresholds([0.9], 0, 4)
    with pytest.raises(ValidationError):
        score_thresholds([0.9], 3, 0)


# ---------------------------------------------------------------------------
# matching


def test_detection_order_ties_by_index():
    dets = [make_label(score=0.5), make_label(score=0.9), make_label(score=0.5)]
    assert detection_order(dets) == [1, 0, 2]
    with pytest.raises(ValidationError):
        detection_order([make_label()])


def test_match_frame_greedy_by_score():
    gts = [make_label()]
    dets = [make_label(score=0.8), make_label(score=0.9)]
    matrix = np.array([[0.9], [0.9]])
    res = match_frame(gts, dets, matrix, 0.7)
    assert res.det_states == ["fp", "tp"]
    assert res.det_gt == [None, 0]
    assert res.gt_det == [1]
    assert res.order == [1, 0]


def test_match_frame_overlap_tie_takes_lowest_gt():
    gts = [make_label(), make_label()]
    dets = [make_label(score=0.9)]
    res = match_frame(gts, dets, np.array([[0.8, 0.8]]), 0.7)
    assert res.det_gt == [0]


def test_match_frame_prefers_evaluate_over_ignore():
    gts = [make_label(), make_label(occlusion=3)]
    statuses = [GtStatus.EVALUATE, GtStatus.IGNORE]
    dets = [make_label(score=0.9)]
    res = match_frame(gts, dets, np.array([[0.75, 0.95]]), 0.7, statuses=statuses)
    assert res.det_states == ["tp"]
    assert res.det_gt == [0]


def test_match_frame_ignore_absorbs():
    gts = [make_label()]
    dets = [make_label(score=0.9)]
    res = match_frame(gts, dets, np.array([[0.8]]), 0.7,
                      statuses=[GtStatus.IGNORE])
    assert res.det_states == ["ignored"]
    assert res.num_tp == 0 and res.num_fp == 0


def test_match_frame_skip_is_invisible():
    gts = [make_label(class_name="Pedestrian")]
    dets = [make_label(score=0.9)]
    res = match_frame(gts, dets, np.array([[1.0]]), 0.7,
                      statuses=[GtStatus.SKIP])
    assert res.det_states == ["fp"]


def test_match_frame_records_errors():
    gt = make_label(loc=(0.0, 1.0, 20.0), alpha=0.2)
    det = make_label(loc=(0.0, 1.0, 22.5), alpha=-0.3, score=0.9)
    res = match_frame([gt], [det], np.array([[1.0]]), 0.7)
    assert res.depth_errors[0] == pytest.approx(2.5)
    assert res.orientation_errors[0] == pytest.approx(-0.5)


def test_match_frame_callable_equals_matrix():
    rng = np.random.default_rng(81)
    gts = [make_label(loc=(float(i), 1.0, 20.0)) for i in range(5)]
    dets = [make_label(score=float(rng.random())) for _ in range(8)]
    matrix = rng.random((8, 5))
    det_idx = {id(d): i for i, d in enumerate(dets)}
    gt_idx = {id(g): i for i, g in enumerate(gts)}
    by_matrix = match_frame(gts, dets, matrix, 0.5)
    by_fn = match_frame(gts, dets,
                        lambda d, g: matrix[det_idx[id(d)], gt_idx[id(g)]], 0.5)
    assert by_matrix == by_fn


def test_match_frame_validation():
    gts = [make_label()]
    dets = [make_label(score=0.9)]
    with pytest.raises(ValidationError):
        match_frame(gts, dets, np.zeros((2, 1)), 0.5)
    with pytest.raises(ValidationError):
        match_frame(gts, dets, np.zeros((1, 1)), 0.5, statuses=[])


def test_match_prefix_property():
    """Matching at a cutoff equals the prefix of the full matching."""
    rng = np.random.default_rng(82)
    for _ in range(20):
        n_gt, n_det = int(rng.integers(1, 10)), int(rng.integers(1, 16))
        gts = [make_label() for _ in range(n_gt)]
        statuses = [GtStatus(rng.choice(["evaluate", "ignore", "skip"]))
                    for _ in range(n_gt)]
        scores = np.round(rng.random(n_det), 2)  # force some ties
        dets = [make_label(score=float(s)) for s in scores]
        matrix = rng.random((n_det, n_gt))
        full = match_frame(gts, dets, matrix, 0.5, statuses=statuses)
        for cutoff in rng.choice(scores, size=3):
            part = match_frame(gts, dets, matrix, 0.5, score_cutoff=float(cutoff),
                               statuses=statuses)
            for i, det in enumerate(dets):
                if det.score >= cutoff:
                    assert part.det_states[i] == full.det_states[i]
                    assert part.det_gt[i] == full.det_gt[i]
                else:
                    assert part.det_states[i] == "excluded"


# ---------------------------------------------------------------------------
# gt classification


def test_difficulty_filter_rules():
    spec = DIFFICULTIES["easy"]
    gts = [
        make_label(bbox=(0, 0, 50, 41)),                  # tall enough
        make_label(bbox=(0, 0, 50, 39)),                  # too small: ignore
        make_label(occlusion=1),                          # occluded: ignore
        make_label(truncation=0.2),                       # truncated: ignore
        make_label(class_name="Van"),                     # neighbor: ignore
        make_label(class_name="DontCare"),                # ignore region
        make_label(class_name="Pedestrian"),              # unrelated: skip
    ]
    assert difficulty_filter(gts, "Car", spec) == [
        GtStatus.EVALUATE, GtStatus.IGNORE, GtStatus.IGNORE, GtStatus.IGNORE,
        GtStatus.IGNORE, GtStatus.IGNORE, GtStatus.SKIP,
    ]
    # Person_sitting shadows Pedestrian but not Cyclist
    ped_spec = DIFFICULTIES["moderate"]
    sitting = make_label(class_name="Person_sitting")
    assert difficulty_filter([sitting], "Pedestrian", ped_spec) == [GtStatus.IGNORE]
    assert difficulty_filter([sitting], "Cyclist", ped_spec) == [GtStatus.SKIP]


def test_difficulty_thresholds_boundary_inclusive():
    spec = DIFFICULTIES["moderate"]
    at_limit = make_label(bbox=(0, 0, 50, 25), occlusion=1, truncation=0.30)
    assert difficulty_filter([at_limit], "Car", spec) == [GtStatus.EVALUATE]


def test_occlusion_split():
    gts = [
        make_label(),                                   # visible
        make_label(occlusion=1),                        # occluded
        make_label(truncation=0.1),                     # occluded via truncation
        make_label(occlusion=3),                        # ignored
        make_label(bbox=(0, 0, 50, 20)),                # too small: ignored
        make_label(class_name="DontCare"),              # ignored
    ]
    assert occlusion_split(gts) == ["fully_visible", "occluded", "occluded",
                                    "ignored", "ignored", "ignored"]


# ---------------------------------------------------------------------------
# pipeline frozen values


def test_ads_single_tp_frozen():
    gt_frames = {"000000": [make_label(loc=(0.0, 1.0, 20.0))]}
    z = 20.0 + math.log(4.0)
    pred_frames = {"000000": [make_label(loc=(0.0, 1.0, z), score=0.9)]}
    config = EvalConfig("Car", 0.7, 0.7, 0.7, recall_points=4)
    value, curve = ads(gt_frames, pred_frames, config, difficulty="easy")
    assert value == pytest.approx(25.0, abs=1e-12)
    assert [r for r, _ in curve] == [0.25, 0.5, 0.75, 1.0]
    assert [v for _, v in curve] == pytest.approx([0.25] * 4, abs=1e-12)
    ap, _ = average_precision(gt_frames, pred_frames, config, "easy", kind="2d")
    assert ap == pytest.approx(100.0, abs=1e-12)


def test_aos_quarter_turn_frozen():
    gt = make_label(alpha=0.3)
    det = make_label(alpha=0.3 + math.pi / 2.0, score=0.9)
    config = EvalConfig("Car", 0.7, 0.7, 0.7, recall_points=4)
    value, _ = aos({"a": [gt]}, {"a": [det]}, config, difficulty="easy")
    assert value == pytest.approx(50.0, abs=1e-12)


def test_no_detections_scores_zero():
    gt_frames = {"000000": [make_label()]}
    report = evaluate_frames(gt_frames, {"000000": []})
    cell = report.classes["Car"]["easy"]
    assert cell.ap_2d == 0.0 and cell.ap_3d == 0.0 and cell.ads == 0.0


def test_unmatched_low_overlap_is_fp():
    gt_frames = {"000000": [make_label()]}
    # same class, far-away 2D box: a pure false positive
    pred_frames = {"000000": [make_label(bbox=(400, 100, 500, 150), score=0.9)]}
    config = EvalConfig.default("Car", recall_points=4)
    ap, _ = average_precision(gt_frames, pred_frames, config, "easy", kind="2d")
    assert ap == 0.0


# ---------------------------------------------------------------------------
# status semantics through the full pipeline


def test_neighbor_class_absorbs_detection():
    car_gt = make_label(bbox=(100, 100, 200, 150))
    van_gt = make_label(class_name="Van", bbox=(400, 100, 500, 150))
    base_pred = make_label(bbox=(100, 100, 200, 150), score=0.9)
    # Car detection sitting on the Van gt, scored above the true positive so
    # that it would land inside every measured operating point if counted
    van_pred = make_label(bbox=(400, 100, 500, 150), score=0.95)
    config = EvalConfig.default("Car", recall_points=4)
    clean, _ = average_precision({"a": [car_gt, van_gt]}, {"a": [base_pred]},
                                 config, "easy", kind="2d")
    with_van, _ = average_precision({"a": [car_gt, van_gt]},
                                    {"a": [base_pred, van_pred]},
                                    config, "easy", kind="2d")
    assert clean == with_van == 100.0
    # the same detection against a Cyclist gt is a false positive
    cyc_gt = make_label(class_name="Cyclist", bbox=(400, 100, 500, 150))
    with_cyc, _ = average_precision({"a": [car_gt, cyc_gt]},
                                    {"a": [base_pred, van_pred]},
                                    config, "easy", kind="2d")
    assert with_cyc == 50.0  # precision 1/2 at every reachable recall


def test_dontcare_absorbs_under_3d_matching():
    car_gt = make_label(loc=(0.0, 1.0, 20.0))
    dc = ObjectLabel("DontCare", -1.0, -1, -10.0, (400.0, 100.0, 500.0, 150.0),
                     (-1.0, -1.0, -1.0), (-1000.0, -1000.0, -1000.0), -10.0)
    good = make_label(loc=(0.0, 1.0, 20.0), score=0.9)
    stray = make_label(bbox=(410.0, 100.0, 500.0, 150.0),
                       loc=(30.0, 1.0, 50.0), score=0.8)
    config = EvalConfig.default("Car", recall_points=4)
    ap, _ = average_precision({"a": [car_gt, dc]}, {"a": [good, stray]},
                              config, "easy", kind="3d")
    # stray has no 3D overlap with anything, but its 2D box sits inside the
    # DontCare region, so it is absorbed rather than counted as a FP
    assert ap == 100.0


def test_missing_pred_frame_means_no_detections():
    gt_frames, pred_frames = random_fixture(num_frames=6, seed=3)
    fid = sorted(gt_frames)[2]
    dropped = {f: d for f, d in pred_frames.items() if f != fid}
    emptied = dict(pred_frames)
    emptied[fid] = []
    a = evaluate_frames(gt_frames, dropped).to_dict()
    b = evaluate_frames(gt_frames, emptied).to_dict()
    assert a == b


def test_orphan_pred_frame_rejected():
    gt_frames, pred_frames = random_fixture(num_frames=4, seed=4)
    pred_frames = dict(pred_frames)
    pred_frames["999999"] = []
    with pytest.raises(EvaluationError):
        evaluate_frames(gt_frames, pred_frames)


def test_cell_present_iff_evaluable_gt():
    gt_frames, pred_frames = random_fixture(num_frames=8, seed=5)
    report = evaluate_frames(gt_frames, pred_frames)
    classes = sorted({g.class_name for f in gt_frames.values() for g in f
                      if g.class_name != "DontCare"})
    for cls in classes:
        for diff, spec in DIFFICULTIES.items():
            evaluable = sum(
                st is GtStatus.EVALUATE
                for frame in gt_frames.values()
                for st in difficulty_filter(frame, cls, spec))
            present = cls in report.classes and diff in report.classes.get(cls, {})
            assert present == (evaluable > 0)


# ---------------------------------------------------------------------------
# invariances


def test_engine_matches_reference_brute_force():
    for seed in (11, 12):
        gt_frames, pred_frames = random_fixture(num_frames=10, seed=seed)
        report = evaluate_frames(gt_frames, pred_frames, occlusion_analysis=False)
        for cls, by_diff in report.classes.items():
            thr2 = default_iou_threshold(cls)
            for diff, cell in by_diff.items():
                ap2, aos_v, ads_v = ref_metrics(gt_frames, pred_frames, cls,
                                                diff, "2d", thr2)
                assert cell.ap_2d == pytest.approx(ap2, abs=1e-9)
                assert cell.aos == pytest.approx(aos_v, abs=1e-9)
                assert cell.ads == pytest.approx(ads_v, abs=1e-9)
                apb, _, _ = ref_metrics(gt_frames, pred_frames, cls, diff,
                                        "bev", thr2)
                ap3, _, _ = ref_metrics(gt_frames, pred_frames, cls, diff,
                                        "3d", thr2)
                assert cell.ap_bev == pytest.approx(apb, abs=1e-9)
                assert cell.ap_3d == pytest.approx(ap3, abs=1e-9)


def test_ads_never_exceeds_ap2d():
    for seed in (21, 22, 23):
        gt_frames, pred_frames = random_fixture(num_frames=6, seed=seed)
        report = evaluate_frames(gt_frames, pred_frames, occlusion_analysis=False)
        for by_diff in report.classes.values():
            for cell in by_diff.values():
                assert cell.ads <= cell.ap_2d + 1e-12
                assert cell.aos <= cell.ap_2d + 1e-12


def test_score_monotone_transform_invariance():
    gt_frames, pred_frames = random_fixture(num_frames=8, seed=31)
    remapped = {
        fid: [ObjectLabel(**{**d.__dict__, "score": 0.2 + d.score ** 3})
              for d in dets]
        for fid, dets in pred_frames.items()
    }
    a = evaluate_frames(gt_frames, pred_frames).to_dict()
    b = evaluate_frames(gt_frames, remapped).to_dict()
    assert a == b


def test_frame_id_relabeling_invariance():
    gt_frames, pred_frames = random_fixture(num_frames=8, seed=32)
    a = evaluate_frames(gt_frames, pred_frames).to_dict()
    b = evaluate_frames({f"z{f}": v for f, v in gt_frames.items()},
                        {f"z{f}": v for f, v in pred_frames.items()}).to_dict()
    assert a == b


def test_jobs_do_not_change_results():
    gt_frames, pred_frames = random_fixture(num_frames=8, seed=33)
    a = evaluate_frames(gt_frames, pred_frames, jobs=1).to_dict()
    b = evaluate_frames(gt_frames, pred_frames, jobs=4).to_dict()
    assert a == b


# ---------------------------------------------------------------------------
# ads_from_matches


def test_ads_from_matches_frozen():
    value = ads_from_matches([0.0, math.log(2.0)], [True, True], [1, 2])
    assert value == pytest.approx(87.5, abs=1e-12)
    # false-positive detections pull the average down
    value = ads_from_matches([0.0, 0.0], [True, False], [2])
    assert value == pytest.approx(50.0, abs=1e-12)


def test_ads_from_matches_validation():
    with pytest.raises(ValidationError):
        ads_from_matches([0.0], [True, False], [1])
    with pytest.raises(ValidationError):
        ads_from_matches([0.0], [True], [])
    with pytest.raises(ValidationError):
        ads_from_matches([0.0], [True], [2])
    with pytest.raises(ValidationError):
        ads_from_matches([0.0], [True], [-1])


# ---------------------------------------------------------------------------
# result sampling


def test_result_sampling_identity_and_clone():
    det = make_label(loc=(2.0, 1.0, 10.0), score=0.8)
    assert result_sampling([det], 0, [], 0.5) == [det]
    out = result_sampling([det], 1, [2.0], 0.5)
    assert len(out) == 2 and out[0] == det
    clone = out[1]
    assert clone.location == pytest.approx((2.4, 1.2, 12.0))
    assert clone.score == pytest.approx(0.4)
    assert clone.bbox2d == det.bbox2d
    assert clone.alpha == det.alpha
    assert clone.dimensions == det.dimensions
    assert clone.rotation_y == det.rotation_y


def test_result_sampling_score_decay_and_order():
    det_a = make_label(loc=(0.0, 1.0, 10.0), score=0.8)
    det_b = make_label(loc=(1.0, 1.0, 20.0), score=0.6)
    out = result_sampling([det_a, det_b], 2, [-2.0, 2.0], 0.5)
    assert len(out) == 6
    assert out[:2] == [det_a, det_b]
    # per-detection clones in offset order
    assert [d.location[2] for d in out[2:]] == [8.0, 12.0, 18.0, 22.0]
    assert [d.score for d in out[2:]] == pytest.approx([0.4, 0.2, 0.3, 0.15])


def test_result_sampling_skips_nonpositive_depths():
    near = make_label(loc=(0.5, 1.0, 1.0), score=0.9)
    out = result_sampling([near], 2, [-2.0, 2.0], 0.5)
    assert [d.location[2] for d in out] == [1.0, 3.0]
    behind = make_label(loc=(0.5, 1.0, -4.0), score=0.9)
    assert result_sampling([behind], 1, [10.0], 0.5) == [behind]


def test_result_sampling_validation():
    det = make_label(score=0.8)
    with pytest.raises(ValidationError):
        result_sampling([det], 2, [1.0], 0.5)
    with pytest.raises(ValidationError):
        result_sampling([det], 1, [1.0], 1.0)
    with pytest.raises(ValidationError):
        result_sampling([det], 1, [1.0], 0.0)
    with pytest.raises(ValidationError):
        result_sampling([make_label()], 1, [1.0], 0.5)


# ---------------------------------------------------------------------------
# configuration and rendering


def test_default_thresholds():
    assert default_iou_threshold("Car") == 0.7
    assert default_iou_threshold("Pedestrian") == 0.5
    config = EvalConfig.default("Car")
    assert config.threshold_for("2d") == 0.7
    assert config.threshold_for("3d") == 0.7
    assert EvalConfig.default("Cyclist").threshold_for("bev") == 0.5
    with pytest.raises(ValidationError):
        config.threshold_for("4d")


def test_iou_overrides_and_wildcard():
    gt_frames = {"a": [make_label(loc=(0.0, 1.0, 20.0))]}
    # half a meter of depth error: 2D IoU stays 1, 3D IoU drops to ~0.52
    pred_frames = {"a": [make_label(loc=(0.0, 1.0, 20.5), score=0.9)]}
    strict = evaluate_frames(gt_frames, pred_frames, occlusion_analysis=False)
    assert strict.classes["Car"]["easy"].ap_3d == 0.0
    loose = evaluate_frames(gt_frames, pred_frames, occlusion_analysis=False,
                            iou_overrides={"3d": {"Car": 0.3}})
    assert loose.classes["Car"]["easy"].ap_3d == 100.0
    wild = evaluate_frames(gt_frames, pred_frames, occlusion_analysis=False,
                           iou_overrides={"3d": {"*": 0.3}})
    assert wild.classes["Car"]["easy"].ap_3d == 100.0


def test_render_table_mentions_every_metric():
    gt_frames, pred_frames = random_fixture(num_frames=6, seed=41)
    report = evaluate_frames(gt_frames, pred_frames)
    text = render_table(report)
    for token in ("AP_2D", "AP_BEV", "AP_3D", "AOS", "ADS", "Car"):
        assert token in text


def test_perfect_predictions_score_100():
    gt_frames, _ = random_fixture(num_frames=6, seed=42)
    pred_frames = {
        fid: [ObjectLabel(**{**g.__dict__, "score": 0.9})
              for g in gts if g.class_name != "DontCare"]
        for fid, gts in gt_frames.items()
    }
    report = evaluate_frames(gt_frames, pred_frames)
    for by_diff in report.classes.values():
        for cell in by_diff.values():
            for metric in ("ap_2d", "ap_bev", "ap_3d", "aos", "ads"):
                assert cell.value(metric) == 100.0
