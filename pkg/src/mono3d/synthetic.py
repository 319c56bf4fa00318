"""Deterministic synthetic scenes for tests, demos and the self test.

The noisy-depth fixture is built so that depth is the only failure mode:
ground truth and predictions share the exact 2D box, orientation and size,
while predicted depth carries Gaussian error and the confidence score decays
with that error. Boxes are large (14 m footprint) and sit close to the
camera axis, so the 3D IoU gate tolerates about 2 m of depth error at the
0.7 threshold and rows are spaced widely enough that neighbours never
cross-match.

Each visible box heads a queue: three heavily occluded companions (occlusion
state 3) sit on the same viewing ray at -4, +4 and +8 m, annotated with only
the thin strip that peeks past the lead box. Every difficulty filter ignores
them, so a hypothesis displaced in depth lands on an ignored box and is
absorbed under 3D matching instead of counting as a false positive, while
under 2D matching the same hypothesis shares the lead box and stays an
ordinary counted detection. That asymmetry is what lets depth-resampling
raise AP_3D on this scene while the depth-aware similarity drops.
"""
from __future__ import annotations

import math
from dataclasses import replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .geom3d import Box3D
from .kitti_io import DONT_CARE, CalibrationSet, ObjectLabel, write_label_file
from .mono_decode import project_box_2d

_FOCAL = 721.5377
_CX, _CY = 609.5593, 172.854

_X_SLOTS = (-7.0, 7.0)
_Z_ROWS = (32.0, 46.0, 60.0)
_DIMS = (4.0, 14.0, 14.0)  # h, w, l
_GROUND_Y = 1.65
_SCORE_DECAY = 2.5  # score = exp(-|depth error| / decay)
_COMPANION_OFFSETS = (-4.0, 4.0, 8.0)  # occluded queue, metres along the ray


def default_calibration() -> CalibrationSet:
    projection = np.array([
        [_FOCAL, 0.0, _CX, 44.85728],
        [0.0, _FOCAL, _CY, 0.2163791],
        [0.0, 0.0, 1.0, 0.002745884],
    ])
    rect = np.eye(3)
    velo_to_cam = np.array([
        [0.0, -1.0, 0.0, 0.0],
        [0.0, 0.0, -1.0, -0.08],
        [1.0, 0.0, 0.0, -0.27],
    ])
    return CalibrationSet(projection, rect, velo_to_cam)


def _gt_label(box: Box3D, calib: CalibrationSet, class_name: str = "Car",
              occlusion: int = 0, truncation: float = 0.0) -> ObjectLabel:
    x, _, z = box.location
    return ObjectLabel(
        class_name=class_name,
        truncation=truncation,
        occlusion=occlusion,
        alpha=box.yaw - math.atan2(x, z),
        bbox2d=project_box_2d(box, calib),
        dimensions=box.dimensions,
        location=box.location,
        rotation_y=box.yaw,
    )


def _companion_label(box: Box3D, calib: CalibrationSet) -> ObjectLabel:
    """Heavily occluded queue member: only a thin bottom strip is visible."""
    label = _gt_label(box, calib, occlusion=3)
    u1, v1, u2, v2 = label.bbox2d
    return replace(label, bbox2d=(u1, v2 - 0.12 * (v2 - v1), u2, v2))


def noisy_depth_fixture(num_frames: int = 50, objects_per_frame: int = 6,
                        sigma: float = 1.5, seed: int = 0):
    """Ground truth plus depth-noisy predictions, one detection per object.

    Predictions sit on the same viewing ray as their object at depth z + e,
    e ~ N(0, sigma^2), with score exp(-|e| / 2.5). Every other attribute (2D
    box, size, yaw, observation angle) is copied from the ground truth, so
    with sigma = 0 the predictions are perfect. Each visible object also
    contributes three occluded companions along its ray (see module
    docstring); those are ground truth only and never detected. Returns
    (gt_frames, pred_frames) keyed by zero-padded frame id.
    """
    rng = np.random.default_rng(seed)
    calib = default_calibration()
    slots = [(sx, sz) for sz in _Z_ROWS for sx in _X_SLOTS]
    if not 0 < objects_per_frame <= len(slots):
        raise ValueError(f"objects_per_frame must be in 1..{len(slots)}")
    gt_frames: dict[str, list[ObjectLabel]] = {}
    pred_frames: dict[str, list[ObjectLabel]] = {}
    for f in range(num_frames):
        fid = f"{f:06d}"
        picks = rng.choice(len(slots), size=objects_per_frame, replace=False)
        gts, preds = [], []
        for slot in picks:
            sx, sz = slots[slot]
            x = sx + rng.uniform(-1.0, 1.0)
            z = sz + rng.uniform(-1.0, 1.0)
            y = _GROUND_Y + rng.uniform(-0.05, 0.05)
            yaw = rng.choice((0.0, math.pi / 2)) + rng.uniform(-0.1, 0.1)
            box = Box3D((x, y, z), _DIMS, yaw)
            gt = _gt_label(box, calib)
            gts.append(gt)
            for off in _COMPANION_OFFSETS:
                scale = (z + off) / z
                gts.append(_companion_label(
                    Box3D((x * scale, y * scale, z + off), _DIMS, yaw), calib))

            err = rng.normal(0.0, sigma) if sigma > 0 else 0.0
            ratio = (z + err) / z
            preds.append(ObjectLabel(
                class_name="Car",
                truncation=0.0,
                occlusion=0,
                alpha=gt.alpha,
                bbox2d=gt.bbox2d,
                dimensions=gt.dimensions,
                location=(x * ratio, y * ratio, z + err),
                rotation_y=gt.rotation_y,
                score=math.exp(-abs(err) / _SCORE_DECAY),
            ))
        gt_frames[fid] = gts
        pred_frames[fid] = preds
    return gt_frames, pred_frames


def perfect_fixture(num_frames: int = 10, objects_per_frame: int = 6, seed: int = 0):
    """Noise-free fixture: every prediction coincides with its object."""
    return noisy_depth_fixture(num_frames, objects_per_frame, sigma=0.0, seed=seed)


_CLASS_DIMS = {
    "Car": (1.5, 1.7, 4.0),
    "Van": (2.2, 1.9, 5.1),
    "Pedestrian": (1.8, 0.6, 0.8),
    "Cyclist": (1.7, 0.6, 1.8),
}


def random_frame(rng: np.random.Generator, max_objects: int = 20,
                 classes: Sequence[str] = ("Car", "Van", "Pedestrian", "Cyclist")):
    """One irregular frame for protocol cross-checks: mixed classes, partial
    detection coverage, noisy localization, stray false positives and the
    occasional DontCare region. Returns (gts, dets)."""
    calib = default_calibration()
    num = int(rng.integers(1, max_objects + 1))
    gts: list[ObjectLabel] = []
    dets: list[ObjectLabel] = []
    for _ in range(num):
        class_name = classes[int(rng.integers(len(classes)))]
        h0, w0, l0 = _CLASS_DIMS[class_name]
        dims = (h0 * rng.uniform(0.9, 1.1), w0 * rng.uniform(0.9, 1.1),
                l0 * rng.uniform(0.9, 1.1))
        z = rng.uniform(8.0, 70.0)
        x = rng.uniform(-0.35, 0.35) * z
        y = _GROUND_Y + rng.uniform(-0.3, 0.3)
        yaw = rng.uniform(-math.pi, math.pi)
        box = Box3D((x, y, z), dims, yaw)
        occlusion = int(rng.choice(4, p=(0.5, 0.25, 0.15, 0.1)))
        truncation = 0.0 if rng.random() < 0.6 else float(rng.uniform(0.0, 0.6))
        gts.append(_gt_label(box, calib, class_name, occlusion, truncation))

        if rng.random() < 0.8:  # detected, with localization noise
            dx, dy, dz = rng.normal(0.0, (0.3, 0.1, 0.8))
            dyaw = rng.normal(0.0, 0.15)
            dbox = Box3D((x + dx, y + dy, z + dz),
                         tuple(d * rng.uniform(0.95, 1.05) for d in dims),
                         yaw + dyaw)
            u1, v1, u2, v2 = project_box_2d(dbox, calib)
            jitter = rng.normal(0.0, 1.0, size=4)
            dets.append(ObjectLabel(
                class_name=class_name,
                truncation=0.0,
                occlusion=0,
                alpha=dbox.yaw - math.atan2(dbox.location[0], dbox.location[2]),
                bbox2d=(u1 + jitter[0], v1 + jitter[1],
                        max(u2 + jitter[2], u1 + jitter[0] + 1.0),
                        max(v2 + jitter[3], v1 + jitter[1] + 1.0)),
                dimensions=dbox.dimensions,
                location=dbox.location,
                rotation_y=dbox.yaw,
                score=float(rng.uniform(0.05, 1.0)),
            ))

    while rng.random() < 0.35:  # DontCare strips
        u1 = rng.uniform(0.0, 1100.0)
        v1 = rng.uniform(100.0, 300.0)
        gts.append(ObjectLabel(DONT_CARE, -1.0, -1, -10.0,
                               (u1, v1, u1 + rng.uniform(20.0, 160.0),
                                v1 + rng.uniform(10.0, 50.0)),
                               (-1.0, -1.0, -1.0), (-1000.0, -1000.0, -1000.0),
                               -10.0))

    for _ in range(int(rng.poisson(2.0))):  # stray false positives
        class_name = classes[int(rng.integers(len(classes)))]
        h0, w0, l0 = _CLASS_DIMS[class_name]
        z = rng.uniform(8.0, 70.0)
        box = Box3D((rng.uniform(-0.35, 0.35) * z, _GROUND_Y, z),
                    (h0, w0, l0), rng.uniform(-math.pi, math.pi))
        dets.append(replace(_gt_label(box, calib, class_name),
                            score=float(rng.uniform(0.05, 1.0))))
    return gts, dets


def random_fixture(num_frames: int = 20, seed: int = 0, max_objects: int = 20):
    """A multi-frame bundle of random_frame scenes."""
    rng = np.random.default_rng(seed)
    gt_frames, pred_frames = {}, {}
    for f in range(num_frames):
        fid = f"{f:06d}"
        gt_frames[fid], pred_frames[fid] = random_frame(rng, max_objects)
    return gt_frames, pred_frames


def write_scene(gt_dir, pred_dir,
                gt_frames: Mapping[str, Sequence[ObjectLabel]],
                pred_frames: Mapping[str, Sequence[ObjectLabel]]) -> None:
    """Materialize frame maps as KITTI label directories."""
    gt_dir, pred_dir = Path(gt_dir), Path(pred_dir)
    gt_dir.mkdir(parents=True, exist_ok=True)
    pred_dir.mkdir(parents=True, exist_ok=True)
    for fid, labels in gt_frames.items():
        (gt_dir / f"{fid}.txt").write_text(write_label_file(labels))
    for fid, labels in pred_frames.items():
        (pred_dir / f"{fid}.txt").write_text(write_label_file(labels))
