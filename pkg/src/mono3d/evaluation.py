"""KITTI-style detection evaluation with depth-aware similarity.

The protocol matches detections to ground truth greedily in descending score
order, samples the precision/similarity curves at fixed recall fractions, and
max-interpolates from the right. Three curve families share the machinery:

* AP      - interpolated precision (2D, bird's-eye-view or 3D matching)
* AOS     - precision weighted by orientation agreement (2D matching)
* ADS     - precision weighted by exp(-|depth error|) (2D matching)

All operations are pure functions; nothing here touches the filesystem except
the directory front-ends at the bottom.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .errors import EvaluationError, ValidationError
from .geom3d import Box3D, iou_2d, iou_2d_matrix, iou_bev, iou_3d, wrap_angle
from .kitti_io import DONT_CARE, ObjectLabel, read_label_directory


@dataclass(frozen=True)
class DifficultySpec:
    """KITTI difficulty gate on 2D height, occlusion state and truncation."""

    name: str
    min_height: float
    max_occlusion: int
    max_truncation: float


DIFFICULTIES: dict[str, DifficultySpec] = {
    "easy": DifficultySpec("easy", 40.0, 0, 0.15),
    "moderate": DifficultySpec("moderate", 25.0, 1, 0.30),
    "hard": DifficultySpec("hard", 25.0, 2, 0.50),
}

# Same-class-family ground truth that must not generate false positives.
NEIGHBOR_IGNORE: dict[str, frozenset[str]] = {
    "Car": frozenset({"Van"}),
    "Pedestrian": frozenset({"Person_sitting"}),
}

DEFAULT_RECALL_POINTS = 40

METRIC_NAMES = ("ap_2d", "ap_bev", "ap_3d", "aos", "ads")

OCCLUSION_BUCKETS = ("fully_visible", "occluded")


def default_iou_threshold(class_name: str) -> float:
    return 0.7 if class_name == "Car" else 0.5


@dataclass(frozen=True)
class EvalConfig:
    """Per-class matching thresholds and the recall sampling density."""

    class_name: str
    iou_2d: float
    iou_bev: float
    iou_3d: float
    recall_points: int = DEFAULT_RECALL_POINTS

    @classmethod
    def default(cls, class_name: str, recall_points: int = DEFAULT_RECALL_POINTS) -> "EvalConfig":
        t = default_iou_threshold(class_name)
        return cls(class_name, t, t, t, recall_points)

    def threshold_for(self, kind: str) -> float:
        try:
            return {"2d": self.iou_2d, "bev": self.iou_bev, "3d": self.iou_3d}[kind]
        except KeyError:
            raise ValidationError(f"unknown matching kind {kind!r}") from None


class GtStatus(Enum):
    """Role of one ground-truth box in a matching pass.

    EVALUATE boxes count toward recall, IGNORE boxes absorb detections without
    producing TPs or FPs, SKIP boxes (unrelated classes) are invisible: a
    detection overlapping only them stays a false positive.
    """

    EVALUATE = "evaluate"
    IGNORE = "ignore"
    SKIP = "skip"


def difficulty_filter(gts: Sequence[ObjectLabel], class_name: str,
                      difficulty: DifficultySpec) -> list[GtStatus]:
    """Classify ground truth for one class/difficulty evaluation."""
    neighbors = NEIGHBOR_IGNORE.get(class_name, frozenset())
    statuses = []
    for gt in gts:
        if gt.class_name == class_name:
            passes = (gt.bbox_height >= difficulty.min_height
                      and gt.occlusion <= difficulty.max_occlusion
                      and gt.truncation <= difficulty.max_truncation)
            statuses.append(GtStatus.EVALUATE if passes else GtStatus.IGNORE)
        elif gt.class_name in neighbors or gt.class_name == DONT_CARE:
            statuses.append(GtStatus.IGNORE)
        else:
            statuses.append(GtStatus.SKIP)
    return statuses


def occlusion_split(gts: Sequence[ObjectLabel],
                    min_height: float = 25.0) -> list[str]:
    """Partition ground truth into visibility buckets.

    Returns one of "fully_visible", "occluded" or "ignored" per box: fully
    visible means occlusion 0 and truncation 0; occlusion states 1-2 or any
    truncation make a box occluded; occlusion 3, DontCare rows and boxes below
    the height floor are ignored.
    """
    out = []
    for gt in gts:
        if gt.class_name == DONT_CARE or gt.occlusion == 3 or gt.bbox_height < min_height:
            out.append("ignored")
        elif gt.occlusion == 0 and gt.truncation == 0.0:
            out.append("fully_visible")
        else:
            out.append("occluded")
    return out


def _occlusion_statuses(gts: Sequence[ObjectLabel], class_name: str,
                        bucket: str) -> list[GtStatus]:
    neighbors = NEIGHBOR_IGNORE.get(class_name, frozenset())
    buckets = occlusion_split(gts)
    statuses = []
    for gt, b in zip(gts, buckets):
        if gt.class_name == class_name:
            statuses.append(GtStatus.EVALUATE if b == bucket else GtStatus.IGNORE)
        elif gt.class_name in neighbors or gt.class_name == DONT_CARE:
            statuses.append(GtStatus.IGNORE)
        else:
            statuses.append(GtStatus.SKIP)
    return statuses


@dataclass
class MatchResult:
    """Outcome of matching one frame at a score cutoff.

    Lists are indexed by the caller's detection order; `order` gives the
    processing order (descending score, ties by original index).
    """

    det_states: list[str]                  # "tp" | "fp" | "ignored" | "excluded"
    det_gt: list[Optional[int]]
    gt_det: list[Optional[int]]
    depth_errors: list[Optional[float]]    # z_det - z_gt for TPs
    orientation_errors: list[Optional[float]]  # wrap(alpha_det - alpha_gt)
    order: list[int]

    @property
    def num_tp(self) -> int:
        return sum(s == "tp" for s in self.det_states)

    @property
    def num_fp(self) -> int:
        return sum(s == "fp" for s in self.det_states)


def detection_order(dets: Sequence[ObjectLabel]) -> list[int]:
    """Processing order: descending score, ties broken by original index."""
    for i, det in enumerate(dets):
        if det.score is None:
            raise ValidationError(f"detection {i} has no score")
    return sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))


def match_frame(gts: Sequence[ObjectLabel], dets: Sequence[ObjectLabel],
                overlap_fn, threshold: float,
                score_cutoff: float = -math.inf,
                statuses: Optional[Sequence[GtStatus]] = None) -> MatchResult:
    """Greedy matching of one frame.

    Detections at or above score_cutoff are processed in descending score
    order; each matches the unmatched EVALUATE gt with the largest overlap if
    that overlap reaches threshold. Failing that, a qualifying overlap with any
    IGNORE gt absorbs the detection (neither TP nor FP); otherwise it is a FP.
    overlap_fn may be a callable (det, gt) -> float or a precomputed
    (len(dets), len(gts)) matrix.
    """
    if statuses is None:
        statuses = [GtStatus.EVALUATE] * len(gts)
    if len(statuses) != len(gts):
        raise ValidationError("statuses and gts disagree in length")

    if callable(overlap_fn):
        lookup = lambda d, g: float(overlap_fn(dets[d], gts[g]))
    else:
        matrix = np.asarray(overlap_fn, dtype=np.float64)
        if matrix.shape != (len(dets), len(gts)):
            raise ValidationError(f"overlap matrix shape {matrix.shape} does not "
                                  f"match ({len(dets)}, {len(gts)})")
        lookup = lambda d, g: float(matrix[d, g])

    n_det, n_gt = len(dets), len(gts)
    det_states = ["excluded"] * n_det
    det_gt: list[Optional[int]] = [None] * n_det
    gt_det: list[Optional[int]] = [None] * n_gt
    depth_errors: list[Optional[float]] = [None] * n_det
    orient_errors: list[Optional[float]] = [None] * n_det

    order = detection_order(dets)
    matched = [False] * n_gt
    for d in order:
        if dets[d].score < score_cutoff:
            continue
        best_ov, best_g = -1.0, -1
        best_ignore = -1.0
        for g in range(n_gt):
            status = statuses[g]
            if status is GtStatus.EVALUATE and not matched[g]:
                ov = lookup(d, g)
                if ov > best_ov:
                    best_ov, best_g = ov, g
            elif status is GtStatus.IGNORE:
                ov = lookup(d, g)
                if ov > best_ignore:
                    best_ignore = ov
        if best_g >= 0 and best_ov >= threshold:
            matched[best_g] = True
            det_states[d] = "tp"
            det_gt[d] = best_g
            gt_det[best_g] = d
            depth_errors[d] = dets[d].location[2] - gts[best_g].location[2]
            orient_errors[d] = wrap_angle(dets[d].alpha - gts[best_g].alpha)
        elif best_ignore >= threshold:
            det_states[d] = "ignored"
        else:
            det_states[d] = "fp"
    return MatchResult(det_states, det_gt, gt_det, depth_errors, orient_errors, order)


def score_thresholds(tp_scores: Sequence[float], num_gt: int,
                     recall_points: int = DEFAULT_RECALL_POINTS) -> list[float]:
    """Score cutoffs realizing the recall grid k / recall_points, k = 1..n.

    tp_scores are the true-positive scores from a full (uncut) matching pass,
    in any order. The cutoff for recall r is the ceil(r * num_gt)-th highest
    TP score; unreachable recalls produce no cutoff, so the result is a prefix
    aligned with k = 1, 2, ... len(result).
    """
    if num_gt <= 0:
        raise EvaluationError("undefined recall: no evaluable ground truth")
    if recall_points < 1:
        raise ValidationError(f"recall_points must be >= 1, got {recall_points}")
    ranked = sorted(tp_scores, reverse=True)
    out = []
    for k in range(1, recall_points + 1):
        need = -(-k * num_gt // recall_points)  # ceil without floats
        if need > len(ranked):
            break
        out.append(ranked[need - 1])
    return out


def _overlap_matrix(dets: Sequence[ObjectLabel], gts: Sequence[ObjectLabel],
                    kind: str) -> np.ndarray:
    """Pairwise overlaps; DontCare gts fall back to 2D IoU under every kind
    because their 3D geometry is a placeholder."""
    if not dets or not gts:
        return np.zeros((len(dets), len(gts)), dtype=np.float64)
    if kind == "2d":
        return iou_2d_matrix(np.array([d.bbox2d for d in dets]),
                             np.array([g.bbox2d for g in gts]))
    pair = iou_bev if kind == "bev" else iou_3d
    det_boxes = [d.box3d() for d in dets]
    out = np.zeros((len(dets), len(gts)), dtype=np.float64)
    for j, gt in enumerate(gts):
        if gt.class_name == DONT_CARE:
            for i, det in enumerate(dets):
                out[i, j] = iou_2d(det.bbox2d, gt.bbox2d)
        else:
            gt_box = gt.box3d()
            for i in range(len(dets)):
                out[i, j] = pair(det_boxes[i], gt_box)
    return out


@dataclass
class _FrameCurve:
    """Per-frame prefix sums over detections in processing order."""

    scores: np.ndarray       # descending
    cum_counted: np.ndarray  # non-ignored detections, length len(scores) + 1
    cum_tp: np.ndarray
    cum_sim_depth: np.ndarray
    cum_sim_orient: np.ndarray
    tp_scores: list[float]
    num_gt: int

    def stats_at(self, cutoff: float):
        idx = int(np.searchsorted(-self.scores, -cutoff, side="right"))
        return (self.cum_counted[idx], self.cum_tp[idx],
                self.cum_sim_depth[idx], self.cum_sim_orient[idx])


def _frame_curve(gts, statuses, dets, matrix, threshold) -> _FrameCurve:
    res = match_frame(gts, dets, matrix, threshold, statuses=statuses)
    order = res.order
    n = len(order)
    scores = np.array([dets[i].score for i in order], dtype=np.float64)
    counted = np.zeros(n)
    tp = np.zeros(n)
    sim_d = np.zeros(n)
    sim_o = np.zeros(n)
    tp_scores = []
    for j, i in enumerate(order):
        state = res.det_states[i]
        if state == "tp":
            counted[j] = 1.0
            tp[j] = 1.0
            sim_d[j] = math.exp(-abs(res.depth_errors[i]))
            sim_o[j] = (1.0 + math.cos(res.orientation_errors[i])) / 2.0
            tp_scores.append(float(scores[j]))
        elif state == "fp":
            counted[j] = 1.0
    num_gt = sum(s is GtStatus.EVALUATE for s in statuses)

    def cum(arr):
        out = np.zeros(n + 1)
        np.cumsum(arr, out=out[1:])
        return out

    return _FrameCurve(scores, cum(counted), cum(tp), cum(sim_d), cum(sim_o),
                       tp_scores, num_gt)


def _interpolate(raw: list[float], recall_points: int):
    """Right-to-left running maximum plus the 0-100 scaled average."""
    interp = [float(v) for v in raw]
    for k in range(recall_points - 2, -1, -1):
        interp[k] = max(interp[k], interp[k + 1])
    value = 100.0 * sum(interp) / recall_points
    curve = [((k + 1) / recall_points, interp[k]) for k in range(recall_points)]
    return value, curve


def _run_pipeline(frame_curves: Sequence[_FrameCurve], recall_points: int):
    """Pooled precision / orientation / depth-similarity curves and values.

    Returns ((ap, ap_curve), (aos, aos_curve), (ads, ads_curve)).
    Raises EvaluationError when there is no evaluable ground truth.
    """
    num_gt = sum(fc.num_gt for fc in frame_curves)
    tp_scores: list[float] = []
    for fc in frame_curves:
        tp_scores.extend(fc.tp_scores)
    thresholds = score_thresholds(tp_scores, num_gt, recall_points)

    precision = [0.0] * recall_points
    sim_orient = [0.0] * recall_points
    sim_depth = [0.0] * recall_points
    for k, cutoff in enumerate(thresholds):
        counted = tp = simd = simo = 0.0
        for fc in frame_curves:
            c, t, sd, so = fc.stats_at(cutoff)
            counted += c
            tp += t
            simd += sd
            simo += so
        if counted > 0:
            precision[k] = tp / counted
            sim_orient[k] = simo / counted
            sim_depth[k] = simd / counted
    return (_interpolate(precision, recall_points),
            _interpolate(sim_orient, recall_points),
            _interpolate(sim_depth, recall_points))


def ads_from_matches(deltas: Sequence[float], tp_flags: Sequence[bool],
                     det_counts_per_recall: Sequence[int]) -> float:
    """ADS from raw match data, detections given in descending score order.

    deltas[i] is the depth error of detection i (ignored when tp_flags[i] is
    false), det_counts_per_recall[k] is the number of counted detections at
    the k-th recall cutoff. Mirrors the inner similarity average of the full
    evaluator; exposed for thin bindings and training-loop probes.
    """
    if len(deltas) != len(tp_flags):
        raise ValidationError("deltas and tp_flags disagree in length")
    n = len(det_counts_per_recall)
    if n == 0:
        raise ValidationError("need at least one recall point")
    sims = [math.exp(-abs(d)) if flag else 0.0 for d, flag in zip(deltas, tp_flags)]
    raw = []
    for count in det_counts_per_recall:
        count = int(count)
        if count < 0 or count > len(sims):
            raise ValidationError(f"detection count {count} out of range")
        raw.append(sum(sims[:count]) / count if count > 0 else 0.0)
    value, _ = _interpolate(raw, n)
    return value


# ---------------------------------------------------------------------------
# Full evaluation


@dataclass
class MetricCell:
    ap_2d: float
    ap_bev: float
    ap_3d: float
    aos: float
    ads: float
    curves: dict[str, list[tuple[float, float]]] = field(default_factory=dict)

    def value(self, metric: str) -> float:
        return getattr(self, metric)


@dataclass
class OcclusionCell:
    ap_3d: float
    ads: float

    def value(self, metric: str) -> float:
        return getattr(self, metric)


@dataclass
class MetricReport:
    recall_points: int
    classes: dict[str, dict[str, MetricCell]]
    occlusion: dict[str, dict[str, OcclusionCell]]

    def to_dict(self) -> dict:
        return {
            "recall_points": self.recall_points,
            "classes": {
                cls: {
                    diff: {
                        **{m: cell.value(m) for m in METRIC_NAMES},
                        "curves": {m: [[r, v] for r, v in curve]
                                   for m, curve in cell.curves.items()},
                    }
                    for diff, cell in by_diff.items()
                }
                for cls, by_diff in self.classes.items()
            },
            "occlusion": {
                cls: {bucket: {"ap_3d": cell.ap_3d, "ads": cell.ads}
                      for bucket, cell in by_bucket.items()}
                for cls, by_bucket in self.occlusion.items()
            },
        }


@dataclass
class _FramePack:
    gts: list[ObjectLabel]
    dets: list[ObjectLabel]
    matrices: dict[str, np.ndarray]


def _build_pack(gts, dets, kinds) -> _FramePack:
    return _FramePack(list(gts), list(dets),
                      {kind: _overlap_matrix(dets, gts, kind) for kind in kinds})


def _class_packs(gt_frames, pred_frames, class_name, kinds, jobs) -> dict[str, _FramePack]:
    frame_ids = sorted(gt_frames)
    inputs = []
    for fid in frame_ids:
        gts = list(gt_frames[fid])
        dets = [d for d in pred_frames.get(fid, []) if d.class_name == class_name]
        inputs.append((gts, dets))
    if jobs > 1 and len(frame_ids) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            packs = list(pool.map(lambda args: _build_pack(*args, kinds), inputs))
    else:
        packs = [_build_pack(gts, dets, kinds) for gts, dets in inputs]
    return dict(zip(frame_ids, packs))


def _check_alignment(gt_frames, pred_frames):
    orphans = sorted(set(pred_frames) - set(gt_frames))
    if orphans:
        raise EvaluationError("predictions reference frames with no ground truth: "
                              + ", ".join(orphans[:10]))


def evaluate_frames(gt_frames: Mapping[str, Sequence[ObjectLabel]],
                    pred_frames: Mapping[str, Sequence[ObjectLabel]],
                    classes: Optional[Sequence[str]] = None,
                    difficulties: Sequence[str] = ("easy", "moderate", "hard"),
                    recall_points: int = DEFAULT_RECALL_POINTS,
                    iou_overrides: Optional[Mapping[str, Mapping[str, float]]] = None,
                    occlusion_analysis: bool = True,
                    jobs: int = 1) -> MetricReport:
    """Evaluate predictions against ground truth, per class and difficulty.

    iou_overrides maps kind ("2d" / "bev" / "3d") to {class: threshold}; the
    key "*" overrides every class without its own entry. Classes default to
    every non-DontCare class present in the ground truth. A class/difficulty
    cell with no evaluable ground truth is omitted from the report. Every
    prediction frame id must exist in gt_frames.
    """
    _check_alignment(gt_frames, pred_frames)
    for name in difficulties:
        if name not in DIFFICULTIES:
            raise ValidationError(f"unknown difficulty {name!r}")
    if classes is None:
        classes = sorted({gt.class_name for frame in gt_frames.values()
                          for gt in frame if gt.class_name != DONT_CARE})
    iou_overrides = iou_overrides or {}

    report_classes: dict[str, dict[str, MetricCell]] = {}
    report_occlusion: dict[str, dict[str, OcclusionCell]] = {}
    kinds = ("2d", "bev", "3d")
    def resolve(kind, class_name):
        ov = iou_overrides.get(kind, {})
        return ov.get(class_name, ov.get("*", default_iou_threshold(class_name)))

    for class_name in classes:
        config = EvalConfig(
            class_name,
            resolve("2d", class_name),
            resolve("bev", class_name),
            resolve("3d", class_name),
            recall_points,
        )
        packs = _class_packs(gt_frames, pred_frames, class_name, kinds, jobs)
        by_diff: dict[str, MetricCell] = {}
        for diff_name in difficulties:
            spec = DIFFICULTIES[diff_name]
            statuses = {fid: difficulty_filter(p.gts, class_name, spec)
                        for fid, p in packs.items()}
            try:
                cell = _evaluate_cell(packs, statuses, config)
            except EvaluationError:
                continue  # no evaluable ground truth for this cell
            by_diff[diff_name] = cell
        if by_diff:
            report_classes[class_name] = by_diff

        if occlusion_analysis:
            by_bucket: dict[str, OcclusionCell] = {}
            for bucket in OCCLUSION_BUCKETS:
                statuses = {fid: _occlusion_statuses(p.gts, class_name, bucket)
                            for fid, p in packs.items()}
                try:
                    curves_3d = [_frame_curve(p.gts, statuses[fid], p.dets,
                                              p.matrices["3d"], config.iou_3d)
                                 for fid, p in packs.items()]
                    (ap3, _), _, _ = _run_pipeline(curves_3d, recall_points)
                    curves_2d = [_frame_curve(p.gts, statuses[fid], p.dets,
                                              p.matrices["2d"], config.iou_2d)
                                 for fid, p in packs.items()]
                    _, _, (ads_v, _) = _run_pipeline(curves_2d, recall_points)
                except EvaluationError:
                    continue
                by_bucket[bucket] = OcclusionCell(ap3, ads_v)
            if by_bucket:
                report_occlusion[class_name] = by_bucket
    return MetricReport(recall_points, report_classes, report_occlusion)


def _evaluate_cell(packs, statuses, config: EvalConfig) -> MetricCell:
    n = config.recall_points
    fids = sorted(packs)

    curves_2d = [_frame_curve(packs[f].gts, statuses[f], packs[f].dets,
                              packs[f].matrices["2d"], config.iou_2d) for f in fids]
    (ap2, ap2_curve), (aos_v, aos_curve), (ads_v, ads_curve) = _run_pipeline(curves_2d, n)

    curves_bev = [_frame_curve(packs[f].gts, statuses[f], packs[f].dets,
                               packs[f].matrices["bev"], config.iou_bev) for f in fids]
    (apb, apb_curve), _, _ = _run_pipeline(curves_bev, n)

    curves_3d = [_frame_curve(packs[f].gts, statuses[f], packs[f].dets,
                              packs[f].matrices["3d"], config.iou_3d) for f in fids]
    (ap3, ap3_curve), _, _ = _run_pipeline(curves_3d, n)

    return MetricCell(ap2, apb, ap3, aos_v, ads_v, {
        "ap_2d": ap2_curve, "ap_bev": apb_curve, "ap_3d": ap3_curve,
        "aos": aos_curve, "ads": ads_curve,
    })


def _single_pipeline(gt_frames, pred_frames, config: EvalConfig, difficulty: str, kind: str):
    if difficulty not in DIFFICULTIES:
        raise ValidationError(f"unknown difficulty {difficulty!r}")
    _check_alignment(gt_frames, pred_frames)
    spec = DIFFICULTIES[difficulty]
    packs = _class_packs(gt_frames, pred_frames, config.class_name, (kind,), jobs=1)
    curves = []
    for fid in sorted(packs):
        p = packs[fid]
        statuses = difficulty_filter(p.gts, config.class_name, spec)
        curves.append(_frame_curve(p.gts, statuses, p.dets, p.matrices[kind],
                                   config.threshold_for(kind)))
    return _run_pipeline(curves, config.recall_points)


def average_precision(gt_frames, pred_frames, config: EvalConfig,
                      difficulty: str = "moderate", kind: str = "3d"):
    """Interpolated AP under the given matching kind. Returns (value, curve)."""
    (ap, curve), _, _ = _single_pipeline(gt_frames, pred_frames, config, difficulty, kind)
    return ap, curve


def aos(gt_frames, pred_frames, config: EvalConfig, difficulty: str = "moderate"):
    """Average orientation similarity (2D matching). Returns (value, curve)."""
    _, (value, curve), _ = _single_pipeline(gt_frames, pred_frames, config, difficulty, "2d")
    return value, curve


def ads(gt_frames, pred_frames, config: EvalConfig, difficulty: str = "moderate"):
    """Average depth similarity (2D matching). Returns (value, curve)."""
    _, _, (value, curve) = _single_pipeline(gt_frames, pred_frames, config, difficulty, "2d")
    return value, curve


# ---------------------------------------------------------------------------
# Result sampling (the metric-gaming transform)


def result_sampling(dets: Sequence[ObjectLabel], n_copies: int,
                    depth_offsets: Sequence[float],
                    score_scale: float) -> list[ObjectLabel]:
    """Clone detections along their viewing rays at shifted depths.

    The k-th clone (k = 1..n_copies) of a detection at (x, y, z) moves to
    depth z + depth_offsets[k-1] with x and y rescaled by (z + offset) / z, so
    its projected center stays put and the 2D box is kept verbatim; its score
    is score * score_scale**k. Clones whose shifted depth would be <= 0 (or
    whose source sits at z <= 0) are skipped. Originals come first, then the
    clones grouped per detection in offset order.
    """
    if n_copies != len(depth_offsets):
        raise ValidationError(f"n_copies={n_copies} but {len(depth_offsets)} offsets given")
    if not 0.0 < score_scale < 1.0:
        raise ValidationError(f"score_scale must lie in (0, 1), got {score_scale}")
    out = list(dets)
    for det in dets:
        if det.score is None:
            raise ValidationError("result sampling needs scored detections")
        x, y, z = det.location
        if z <= 0:
            continue
        for k, offset in enumerate(depth_offsets, start=1):
            new_z = z + offset
            if new_z <= 0:
                continue
            ratio = new_z / z
            out.append(replace(det,
                               location=(x * ratio, y * ratio, new_z),
                               score=det.score * score_scale ** k))
    return out


# ---------------------------------------------------------------------------
# Directory front-end and report rendering


def evaluate_dirs(gt_dir, pred_dir, **kwargs) -> MetricReport:
    """Evaluate a directory pair of KITTI label files (one file per frame)."""
    gt_frames = read_label_directory(gt_dir, expect_scores=False)
    pred_frames = read_label_directory(pred_dir, expect_scores=True)
    return evaluate_frames(gt_frames, pred_frames, **kwargs)


_METRIC_LABELS = {"ap_2d": "AP_2D", "ap_bev": "AP_BEV", "ap_3d": "AP_3D",
                  "aos": "AOS", "ads": "ADS"}


def render_table(report: MetricReport, difficulties=("easy", "moderate", "hard")) -> str:
    """Human-readable summary, one block per class."""
    lines = []
    for class_name in sorted(report.classes):
        by_diff = report.classes[class_name]
        lines.append(f"== {class_name} ==  (recall points: {report.recall_points})")
        header = f"{'':<8}" + "".join(f"{d.capitalize():>12}" for d in difficulties)
        lines.append(header)
        for metric in METRIC_NAMES:
            row = f"{_METRIC_LABELS[metric]:<8}"
            for d in difficulties:
                cell = by_diff.get(d)
                row += f"{cell.value(metric):>12.2f}" if cell is not None else f"{'-':>12}"
            lines.append(row)
        if class_name in report.occlusion:
            lines.append(f"-- occlusion analysis ({class_name}, moderate thresholds) --")
            buckets = report.occlusion[class_name]
            lines.append(f"{'':<8}" + "".join(f"{b:>16}" for b in OCCLUSION_BUCKETS))
            for metric in ("ap_3d", "ads"):
                row = f"{_METRIC_LABELS[metric]:<8}"
                for b in OCCLUSION_BUCKETS:
                    cell = buckets.get(b)
                    row += f"{cell.value(metric):>16.2f}" if cell is not None else f"{'-':>16}"
                lines.append(row)
        lines.append("")
    if not report.classes:
        lines.append("(no evaluable ground truth)")
    return "\n".join(lines)


def write_report(report: MetricReport, out_dir) -> None:
    """Write report.json, summary.csv and per-curve CSVs under out_dir."""
    import csv
    import json

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")

    with open(out_dir / "summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class", "difficulty", "metric", "value"])
        for cls in sorted(report.classes):
            for diff, cell in report.classes[cls].items():
                for metric in METRIC_NAMES:
                    writer.writerow([cls, diff, metric, repr(cell.value(metric))])
        for cls in sorted(report.occlusion):
            for bucket, cell in report.occlusion[cls].items():
                for metric in ("ap_3d", "ads"):
                    writer.writerow([cls, bucket, metric, repr(cell.value(metric))])

    curve_dir = out_dir / "curves"
    curve_dir.mkdir(exist_ok=True)
    for cls in sorted(report.classes):
        for diff, cell in report.classes[cls].items():
            for metric, curve in cell.curves.items():
                path = curve_dir / f"{cls}_{diff}_{metric}.csv"
                with open(path, "w", newline="") as fh:
                    writer = csv.writer(fh)
                    writer.writerow(["recall", "value"])
                    for recall, value in curve:
                        writer.writerow([repr(recall), repr(value)])
