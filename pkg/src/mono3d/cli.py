"""Command-line front-end.

Exit codes: 0 success, 2 malformed input (format, validation or geometry
failures), 3 evaluation alignment problems (predictions for unknown frames,
no evaluable ground truth), 64 usage errors.
"""
from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .errors import EvaluationError, FormatError, GeometryError, ValidationError
from .evaluation import (DEFAULT_RECALL_POINTS, evaluate_frames, render_table,
                         result_sampling, write_report)
from .geom3d import wrap_angle
from .kitti_io import (DONT_CARE, ObjectLabel, parse_calib_file, parse_label_file,
                       parse_velodyne, read_label_directory, velo_to_rect,
                       write_label_file)
from .mono_decode import (DEFAULT_MEAN_DIMS, DecoderConfig, DepthEstimate,
                          assemble_box, project_box_2d)
from .shape_labels import DEFAULT_GRID_SIZE, generate_mask, write_mask
from .synthetic import noisy_depth_fixture, perfect_fixture

USAGE_EXIT = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


def _csv_list(text: str) -> list[str]:
    items = [t.strip() for t in text.split(",") if t.strip()]
    if not items:
        raise argparse.ArgumentTypeError("expected a comma-separated list")
    return items


def _csv_floats(text: str) -> list[float]:
    try:
        return [float(t) for t in _csv_list(text)]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _iou_spec(text: str) -> tuple[str, float]:
    """'Class=0.5' or bare '0.5' (applies to all classes)."""
    name, sep, value = text.partition("=")
    try:
        if sep:
            return name, float(value)
        return "*", float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad IoU threshold {text!r}")


def _nonneg_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad count {text!r}")
    if value < 0:
        raise argparse.ArgumentTypeError(f"count must be >= 0, got {text}")
    return value


def _unit_interval(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad scale {text!r}")
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"scale must lie in (0, 1), got {text}")
    return value


def _mean_dims_spec(text: str) -> tuple[str, tuple[float, float, float]]:
    """'Class=h,w,l' in meters."""
    name, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected Class=h,w,l, got {text!r}")
    parts = value.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected three dimensions in {text!r}")
    try:
        h, w, l = (float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad dimensions in {text!r}")
    return name, (h, w, l)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mono3d",
                     description="Monocular 3D detection toolkit: evaluation with "
                                 "depth-aware similarity, box decoding, LiDAR mask "
                                 "labels and the depth-resampling demonstration.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("evaluate", help="score predictions against ground truth")
    p.add_argument("--gt-dir", required=True, help="directory of ground-truth label files")
    p.add_argument("--pred-dir", required=True, help="directory of scored prediction files")
    p.add_argument("--out", help="directory for report.json, summary.csv and curves/")
    p.add_argument("--classes", type=_csv_list,
                   help="comma-separated classes (default: all in ground truth)")
    p.add_argument("--difficulties", type=_csv_list, default=["easy", "moderate", "hard"])
    p.add_argument("--recall-points", type=int, default=DEFAULT_RECALL_POINTS)
    p.add_argument("--iou-2d", action="append", type=_iou_spec, metavar="[CLASS=]T")
    p.add_argument("--iou-bev", action="append", type=_iou_spec, metavar="[CLASS=]T")
    p.add_argument("--iou-3d", action="append", type=_iou_spec, metavar="[CLASS=]T")
    p.add_argument("--no-occlusion", action="store_true",
                   help="skip the visibility-bucket analysis")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("decode", help="turn head observations into KITTI predictions")
    p.add_argument("--obs", required=True, help="observation table, one object per row")
    p.add_argument("--calib-dir", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--num-bins", type=int, default=4)
    p.add_argument("--mean-dims", action="append", type=_mean_dims_spec,
                   metavar="CLASS=H,W,L", help="override per-class mean sizes")
    p.set_defaults(func=_cmd_decode)

    p = sub.add_parser("maskgen", help="LiDAR-derived instance mask labels")
    p.add_argument("--label-dir", required=True)
    p.add_argument("--calib-dir", required=True)
    p.add_argument("--velo-dir", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--size", type=int, default=DEFAULT_GRID_SIZE)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--classes", type=_csv_list, default=["Car", "Pedestrian", "Cyclist"])
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=_cmd_maskgen)

    p = sub.add_parser("sample-attack",
                       help="clone detections along depth (metric-gaming demo)")
    p.add_argument("--gt-dir", required=True)
    p.add_argument("--pred-dir", required=True)
    p.add_argument("--out-dir", help="also write the cloned prediction files here")
    p.add_argument("--copies", type=_nonneg_int, default=3,
                   help="clones per detection; 0 disables cloning")
    p.add_argument("--offsets", type=_csv_floats, default=[-4.0, 4.0, 8.0],
                   help="comma-separated depth offsets in meters, one per copy; "
                        "write --offsets=-4,4,8 when the list starts with a minus")
    p.add_argument("--scale", type=_unit_interval, default=0.5,
                   help="per-copy score multiplier in (0, 1)")
    p.set_defaults(func=_cmd_sample_attack)

    p = sub.add_parser("selftest", help="run the built-in demonstration checks")
    p.set_defaults(func=_cmd_selftest)
    return parser


def _cmd_evaluate(args) -> int:
    overrides = {}
    for kind, pairs in (("2d", args.iou_2d), ("bev", args.iou_bev), ("3d", args.iou_3d)):
        if pairs:
            overrides[kind] = dict(pairs)
    report = evaluate_frames(
        read_label_directory(args.gt_dir, expect_scores=False),
        read_label_directory(args.pred_dir, expect_scores=True),
        classes=args.classes,
        difficulties=tuple(args.difficulties),
        recall_points=args.recall_points,
        iou_overrides=overrides,
        occlusion_analysis=not args.no_occlusion,
        jobs=args.jobs,
    )
    print(render_table(report, tuple(args.difficulties)))
    if args.out:
        write_report(report, args.out)
    return 0


def _read_observations(path: Path, num_bins: int):
    """Rows: frame class u v  4x(z sigma)  dh dw dl  B logits  Bx(sin cos)  score."""
    width = 16 + 3 * num_bins
    rows = []
    try:
        text = path.read_text()
    except OSError as exc:
        raise FormatError(f"cannot read observations: {exc}", path=str(path))
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        tokens = line.split()
        if len(tokens) != width:
            raise FormatError(f"expected {width} columns for {num_bins} bins, "
                              f"got {len(tokens)}", path=str(path), line=line_no)
        frame, class_name = tokens[0], tokens[1]
        try:
            values = [float(t) for t in tokens[2:]]
        except ValueError as exc:
            raise FormatError(str(exc), path=str(path), line=line_no)
        if not all(np.isfinite(values)):
            raise FormatError("non-finite value", path=str(path), line=line_no)
        rows.append((frame, class_name, values))
    return rows


def _cmd_decode(args) -> int:
    mean_dims = dict(DEFAULT_MEAN_DIMS)
    for name, dims in args.mean_dims or []:
        mean_dims[name] = dims
    config = DecoderConfig(mean_dims, num_bins=args.num_bins)
    calib_dir = Path(args.calib_dir)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    calibs = {}

    def calib_for(frame):
        if frame not in calibs:
            path = calib_dir / f"{frame}.txt"
            if not path.is_file():
                raise EvaluationError(f"no calibration for frame {frame}")
            calibs[frame] = parse_calib_file(path.read_text(), path=str(path))
        return calibs[frame]

    b = args.num_bins
    per_frame: dict[str, list[ObjectLabel]] = {}
    for frame, class_name, vals in _read_observations(Path(args.obs), b):
        calib = calib_for(frame)
        center2d = (vals[0], vals[1])
        estimates = [DepthEstimate(vals[2 + 2 * i], vals[3 + 2 * i]) for i in range(4)]
        dim_deltas = tuple(vals[10:13])
        logits = vals[13:13 + b]
        sincos = [(vals[13 + b + 2 * i], vals[14 + b + 2 * i]) for i in range(b)]
        score = vals[13 + 3 * b]
        box = assemble_box(center2d, estimates, dim_deltas, logits, sincos,
                           class_name, calib, config)
        x, _, z = box.location
        per_frame.setdefault(frame, []).append(ObjectLabel(
            class_name=class_name,
            truncation=0.0,
            occlusion=0,
            alpha=wrap_angle(box.yaw - np.arctan2(x, z)),
            bbox2d=project_box_2d(box, calib),
            dimensions=box.dimensions,
            location=box.location,
            rotation_y=box.yaw,
            score=score,
        ))
    for frame, labels in per_frame.items():
        (out_dir / f"{frame}.txt").write_text(write_label_file(labels))
    print(f"decoded {sum(map(len, per_frame.values()))} boxes "
          f"across {len(per_frame)} frames into {out_dir}")
    return 0


def _object_seed(base: int, frame: str, index: int) -> int:
    if not frame.isdigit():
        raise ValidationError(f"frame id {frame!r} is not numeric")
    seq = np.random.SeedSequence(base, spawn_key=(int(frame), index))
    return int(seq.generate_state(1)[0])


def _cmd_maskgen(args) -> int:
    label_dir = Path(args.label_dir)
    calib_dir = Path(args.calib_dir)
    velo_dir = Path(args.velo_dir)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    wanted = set(args.classes)

    frames = sorted(p.stem for p in label_dir.glob("*.txt"))
    if not frames:
        raise EvaluationError(f"no label files in {label_dir}")

    def run_frame(frame: str) -> int:
        labels = parse_label_file((label_dir / f"{frame}.txt").read_text(),
                                  path=str(label_dir / f"{frame}.txt"))
        calib_path = calib_dir / f"{frame}.txt"
        velo_path = velo_dir / f"{frame}.bin"
        if not calib_path.is_file():
            raise EvaluationError(f"no calibration for frame {frame}")
        if not velo_path.is_file():
            raise EvaluationError(f"no point cloud for frame {frame}")
        calib = parse_calib_file(calib_path.read_text(), path=str(calib_path))
        cloud = velo_to_rect(parse_velodyne(velo_path.read_bytes()), calib)
        written = 0
        for index, label in enumerate(labels):
            if label.class_name == DONT_CARE or label.class_name not in wanted:
                continue
            mask = generate_mask(label.box3d(), cloud, label.bbox2d, args.size,
                                 calib, _object_seed(args.seed, frame, index))
            (out_dir / f"{frame}_{index:02d}.txt").write_text(write_mask(mask))
            written += 1
        return written

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            counts = list(pool.map(run_frame, frames))
    else:
        counts = [run_frame(f) for f in frames]
    print(f"wrote {sum(counts)} masks for {len(frames)} frames into {out_dir}")
    return 0


_ATTACK_COLUMNS = (("ap_2d", "AP_2D"), ("ap_bev", "AP_BEV"), ("ap_3d", "AP_3D"),
                   ("aos", "AOS"), ("ads", "ADS"))


def _cmd_sample_attack(args) -> int:
    gt_frames = read_label_directory(args.gt_dir, expect_scores=False)
    pred_frames = read_label_directory(args.pred_dir, expect_scores=True)
    offsets = args.offsets if args.copies else []
    attacked = {frame: result_sampling(dets, args.copies, offsets, args.scale)
                for frame, dets in pred_frames.items()}

    if args.out_dir:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        total = 0
        for frame, dets in attacked.items():
            total += len(dets) - len(pred_frames[frame])
            (out_dir / f"{frame}.txt").write_text(write_label_file(dets))
        print(f"added {total} clones across {len(pred_frames)} frames into {out_dir}")

    before = evaluate_frames(gt_frames, pred_frames, occlusion_analysis=False)
    after = evaluate_frames(gt_frames, attacked, occlusion_analysis=False)
    for class_name in sorted(before.classes):
        cell_b = before.classes[class_name].get("moderate")
        cell_a = after.classes[class_name].get("moderate")
        if cell_b is None or cell_a is None:
            continue
        print(f"== {class_name} (moderate) ==")
        print(f"{'':<8}" + "".join(f"{label:>9}" for _, label in _ATTACK_COLUMNS))
        for row, cell in (("before", cell_b), ("after", cell_a)):
            print(f"{row:<8}" + "".join(
                f"{cell.value(m):9.2f}" for m, _ in _ATTACK_COLUMNS))
        print(f"{'delta':<8}" + "".join(
            f"{cell_a.value(m) - cell_b.value(m):+9.2f}" for m, _ in _ATTACK_COLUMNS))
    return 0


def _cmd_selftest(args) -> int:
    checks: list[tuple[str, bool]] = []

    gt, pred = perfect_fixture(num_frames=10, seed=7)
    cell = evaluate_frames(gt, pred, occlusion_analysis=False).classes["Car"]["moderate"]
    perfect = all(cell.value(m) == 100.0 for m in
                  ("ap_2d", "ap_bev", "ap_3d", "aos", "ads"))
    checks.append(("perfect input scores 100.0 on every metric", perfect))

    gt, pred = noisy_depth_fixture(num_frames=50, seed=0)
    base = evaluate_frames(gt, pred, occlusion_analysis=False).classes["Car"]["moderate"]
    attacked_preds = {f: result_sampling(d, 3, (-4.0, 4.0, 8.0), 0.5)
                      for f, d in pred.items()}
    attacked = evaluate_frames(gt, attacked_preds,
                               occlusion_analysis=False).classes["Car"]["moderate"]
    d_ap3 = attacked.ap_3d - base.ap_3d
    d_ads = attacked.ads - base.ads
    checks.append((f"depth resampling raises AP_3D ({d_ap3:+.2f})", d_ap3 >= 5.0))
    checks.append((f"depth resampling lowers ADS ({d_ads:+.2f})", d_ads <= -2.0))

    failed = 0
    for label, ok in checks:
        print(("PASS" if ok else "FAIL") + " " + label)
        failed += 0 if ok else 1
    return 0 if failed == 0 else 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FormatError, ValidationError, GeometryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except EvaluationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
