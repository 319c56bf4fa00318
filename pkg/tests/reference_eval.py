"""Naive reference implementation of the evaluation protocol for cross-checks.

Deliberately slow and literal: every score cutoff re-runs the greedy matching
from scratch on every frame. No prefix tricks, no caching. The production
engine must agree with this to float precision.
"""
import math

from mono3d.geom3d import iou_2d, iou_3d, iou_bev, wrap_angle
from mono3d.kitti_io import DONT_CARE

REF_DIFFICULTIES = {
    "easy": (40.0, 0, 0.15),
    "moderate": (25.0, 1, 0.30),
    "hard": (25.0, 2, 0.50),
}

REF_NEIGHBORS = {"Car": {"Van"}, "Pedestrian": {"Person_sitting"}}


def ref_statuses(gts, class_name, difficulty):
    min_h, max_occ, max_trunc = REF_DIFFICULTIES[difficulty]
    out = []
    for gt in gts:
        if gt.class_name == class_name:
            height = gt.bbox2d[3] - gt.bbox2d[1]
            ok = (height >= min_h and gt.occlusion <= max_occ
                  and gt.truncation <= max_trunc)
            out.append("eval" if ok else "ignore")
        elif gt.class_name in REF_NEIGHBORS.get(class_name, ()) or gt.class_name == DONT_CARE:
            out.append("ignore")
        else:
            out.append("skip")
    return out


def ref_overlaps(dets, gts, kind):
    table = []
    for det in dets:
        row = []
        for gt in gts:
            if kind == "2d" or gt.class_name == DONT_CARE:
                row.append(iou_2d(det.bbox2d, gt.bbox2d))
            elif kind == "bev":
                row.append(iou_bev(det.box3d(), gt.box3d()))
            else:
                row.append(iou_3d(det.box3d(), gt.box3d()))
        table.append(row)
    return table


def ref_match(gts, statuses, dets, overlaps, threshold, cutoff):
    """Greedy matching; returns per-processed-detection records
    (state, sim_depth, sim_orient) in descending-score order."""
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    matched = [False] * len(gts)
    records = []
    for i in order:
        if dets[i].score < cutoff:
            continue
        best_ov, best_g = -1.0, -1
        best_ignore = -1.0
        for g in range(len(gts)):
            if statuses[g] == "eval" and not matched[g]:
                if overlaps[i][g] > best_ov:
                    best_ov, best_g = overlaps[i][g], g
            elif statuses[g] == "ignore":
                best_ignore = max(best_ignore, overlaps[i][g])
        if best_g >= 0 and best_ov >= threshold:
            matched[best_g] = True
            dz = dets[i].location[2] - gts[best_g].location[2]
            da = wrap_angle(dets[i].alpha - gts[best_g].alpha)
            records.append(("tp", math.exp(-abs(dz)), (1.0 + math.cos(da)) / 2.0))
        elif best_ignore >= threshold:
            records.append(("ignored", 0.0, 0.0))
        else:
            records.append(("fp", 0.0, 0.0))
    return records


def ref_thresholds(tp_scores, num_gt, n):
    ranked = sorted(tp_scores, reverse=True)
    out = []
    for k in range(1, n + 1):
        need = math.ceil(k * num_gt / n)
        if need > len(ranked):
            break
        out.append(ranked[need - 1])
    return out


def ref_interpolate(raw):
    n = len(raw)
    interp = list(raw)
    for k in range(n - 2, -1, -1):
        interp[k] = max(interp[k], interp[k + 1])
    return 100.0 * sum(interp) / n, interp


def ref_metrics(gt_frames, pred_frames, class_name, difficulty, kind,
                threshold, n=40):
    """(ap, aos, ads) by brute-force cutoff enumeration.

    aos and ads are meaningful only for kind='2d'; they are computed for any
    kind anyway, from the same matching.
    """
    fids = sorted(gt_frames)
    per_frame = []
    num_gt = 0
    tp_scores = []
    for fid in fids:
        gts = list(gt_frames[fid])
        dets = [d for d in pred_frames.get(fid, []) if d.class_name == class_name]
        statuses = ref_statuses(gts, class_name, difficulty)
        overlaps = ref_overlaps(dets, gts, kind)
        num_gt += sum(s == "eval" for s in statuses)
        # collect tp scores from a full (uncut) pass
        full = ref_match(gts, statuses, dets, overlaps, threshold, -math.inf)
        order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
        for rec, i in zip(full, order):
            if rec[0] == "tp":
                tp_scores.append(dets[i].score)
        per_frame.append((gts, statuses, dets, overlaps))

    if num_gt <= 0:
        raise ZeroDivisionError("no evaluable ground truth")
    cutoffs = ref_thresholds(tp_scores, num_gt, n)

    precision = [0.0] * n
    sim_o = [0.0] * n
    sim_d = [0.0] * n
    for k, cutoff in enumerate(cutoffs):
        counted = tp = sd = so = 0.0
        for gts, statuses, dets, overlaps in per_frame:
            f_counted = f_tp = f_sd = f_so = 0.0
            for state, simd, simo in ref_match(gts, statuses, dets, overlaps,
                                               threshold, cutoff):
                if state == "tp":
                    f_counted += 1.0
                    f_tp += 1.0
                    f_sd += simd
                    f_so += simo
                elif state == "fp":
                    f_counted += 1.0
            counted += f_counted
            tp += f_tp
            sd += f_sd
            so += f_so
        if counted > 0:
            precision[k] = tp / counted
            sim_o[k] = so / counted
            sim_d[k] = sd / counted
    ap, _ = ref_interpolate(precision)
    aos_v, _ = ref_interpolate(sim_o)
    ads_v, _ = ref_interpolate(sim_d)
    return ap, aos_v, ads_v
