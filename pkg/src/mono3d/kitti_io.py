"""Readers and writers for KITTI object-detection data.

Label files carry 15 whitespace-separated fields per object (16 when a
trailing confidence score is present), calibration files are "KEY: v1 v2 ..."
lines, and velodyne scans are raw little-endian float32 records of
(x, y, z, reflectance).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import FormatError, ValidationError
from .geom3d import Box3D, wrap_angle

DONT_CARE = "DontCare"

LABEL_FIELDS = 15
LABEL_FIELDS_SCORED = 16


@dataclass(frozen=True)
class ObjectLabel:
    """One row of a KITTI label file."""

    class_name: str
    truncation: float
    occlusion: int
    alpha: float
    bbox2d: tuple[float, float, float, float]  # left, top, right, bottom (px)
    dimensions: tuple[float, float, float]     # h, w, l (m)
    location: tuple[float, float, float]       # x, y, z camera frame (m)
    rotation_y: float
    score: Optional[float] = None

    @property
    def bbox_height(self) -> float:
        return self.bbox2d[3] - self.bbox2d[1]

    def box3d(self) -> Box3D:
        return Box3D(self.location, self.dimensions, self.rotation_y)


@dataclass(frozen=True, eq=False)
class CalibrationSet:
    """Camera-2 projection plus the velodyne-to-rectified transform chain."""

    projection: np.ndarray    # P2, (3, 4)
    rect: np.ndarray          # R0_rect, (3, 3)
    velo_to_cam: np.ndarray   # Tr_velo_to_cam, (3, 4)

    @property
    def focal(self) -> float:
        return float(self.projection[0, 0])

    @property
    def principal(self) -> tuple[float, float]:
        return (float(self.projection[0, 2]), float(self.projection[1, 2]))


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Velodyne scan: points is an (n, 4) float array, columns x, y, z, reflectance."""

    points: np.ndarray

    def __len__(self) -> int:
        return len(self.points)


def _parse_float(token: str, what: str, path, line_no) -> float:
    try:
        value = float(token)
    except ValueError:
        raise FormatError(f"{what}: not a number ({token!r})", path, line_no) from None
    if not math.isfinite(value):
        raise FormatError(f"{what}: non-finite value ({token!r})", path, line_no)
    return value


def parse_label_line(line: str, *, expect_scores: bool = False,
                     path=None, line_no=None) -> ObjectLabel:
    """Parse one label row. Field count must match expect_scores exactly."""
    tokens = line.split()
    want = LABEL_FIELDS_SCORED if expect_scores else LABEL_FIELDS
    if len(tokens) != want:
        raise FormatError(f"expected {want} fields, got {len(tokens)}", path, line_no)
    name = tokens[0]
    values = [_parse_float(t, f"field {i + 1}", path, line_no)
              for i, t in enumerate(tokens[1:], start=1)]
    truncation, occlusion_raw = values[0], values[1]
    alpha = wrap_angle(values[2])
    bbox = tuple(values[3:7])
    dims = tuple(values[7:10])
    loc = tuple(values[10:13])
    rotation_y = wrap_angle(values[13])
    score = values[14] if expect_scores else None

    if occlusion_raw != int(occlusion_raw):
        raise FormatError(f"occlusion must be integral, got {occlusion_raw}", path, line_no)
    occlusion = int(occlusion_raw)

    if name != DONT_CARE:
        # Placeholder fields are legal on DontCare rows only.
        if not 0.0 <= truncation <= 1.0:
            raise FormatError(f"truncation out of [0, 1]: {truncation}", path, line_no)
        if occlusion not in (0, 1, 2, 3):
            raise FormatError(f"occlusion out of {{0, 1, 2, 3}}: {occlusion}", path, line_no)
        if not (dims[0] > 0 and dims[1] > 0 and dims[2] > 0):
            raise FormatError(f"dimensions must be positive, got {dims}", path, line_no)
        if not (bbox[0] < bbox[2] and bbox[1] < bbox[3]):
            raise FormatError(f"degenerate 2D box {bbox}", path, line_no)
    return ObjectLabel(name, truncation, occlusion, alpha, bbox, dims, loc,
                       rotation_y, score)


def parse_label_file(text: str, *, expect_scores: bool = False,
                     path=None) -> list[ObjectLabel]:
    """Parse a label file body. Blank lines are ignored, order is preserved."""
    labels = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        labels.append(parse_label_line(raw, expect_scores=expect_scores,
                                       path=path, line_no=line_no))
    return labels


def _format_float(value: float) -> str:
    value = float(value)
    if not math.isfinite(value):
        raise ValidationError(f"cannot serialize non-finite value {value}")
    # repr() is the shortest string that round-trips the exact double.
    return repr(value)


def write_label_line(label: ObjectLabel) -> str:
    fields = [label.class_name,
              _format_float(label.truncation),
              str(int(label.occlusion)),
              _format_float(wrap_angle(label.alpha))]
    fields += [_format_float(v) for v in label.bbox2d]
    fields += [_format_float(v) for v in label.dimensions]
    fields += [_format_float(v) for v in label.location]
    fields.append(_format_float(wrap_angle(label.rotation_y)))
    if label.score is not None:
        fields.append(_format_float(label.score))
    return " ".join(fields)


def write_label_file(labels: Sequence[ObjectLabel]) -> str:
    """Serialize labels one per line; parse(write(labels)) == labels."""
    return "".join(write_label_line(lab) + "\n" for lab in labels)


_CALIB_SHAPES = {"P2": 12, "R0_rect": 9, "Tr_velo_to_cam": 12}


def parse_calib_file(text: str, path=None) -> CalibrationSet:
    """Parse a calibration file; requires P2, R0_rect and Tr_velo_to_cam."""
    entries: dict[str, np.ndarray] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if ":" not in line:
            raise FormatError("calibration line without 'KEY:' prefix", path, line_no)
        key, _, rest = line.partition(":")
        key = key.strip()
        try:
            values = np.array([float(t) for t in rest.split()], dtype=np.float64)
        except ValueError:
            raise FormatError(f"non-numeric calibration entry for {key}", path, line_no) from None
        if key in _CALIB_SHAPES and len(values) != _CALIB_SHAPES[key]:
            raise FormatError(f"{key} needs {_CALIB_SHAPES[key]} values, got {len(values)}",
                              path, line_no)
        entries[key] = values
    missing = [k for k in _CALIB_SHAPES if k not in entries]
    if missing:
        raise FormatError(f"calibration missing keys: {', '.join(missing)}", path)
    projection = entries["P2"].reshape(3, 4)
    rect = entries["R0_rect"].reshape(3, 3)
    velo_to_cam = entries["Tr_velo_to_cam"].reshape(3, 4)
    residual = np.abs(rect @ rect.T - np.eye(3)).max()
    if residual > 1e-6:
        raise ValidationError(f"R0_rect is not orthonormal (max residual {residual:g})")
    return CalibrationSet(projection, rect, velo_to_cam)


def parse_velodyne(data: bytes) -> PointCloud:
    """Decode a velodyne .bin payload; record order is preserved."""
    if len(data) % 16 != 0:
        raise FormatError(f"velodyne payload length {len(data)} is not a multiple of 16")
    points = np.frombuffer(data, dtype="<f4").reshape(-1, 4).astype(np.float64)
    if points.size and not np.isfinite(points).all():
        raise ValidationError("velodyne scan contains non-finite coordinates")
    return PointCloud(points)


def velo_to_rect(cloud: PointCloud, calib: CalibrationSet) -> np.ndarray:
    """Transform velodyne points into the rectified camera frame, (n, 3)."""
    xyz = cloud.points[:, :3]
    cam = xyz @ calib.velo_to_cam[:, :3].T + calib.velo_to_cam[:, 3]
    return cam @ calib.rect.T


def frame_id_of(path: Path) -> str:
    return Path(path).stem


def read_label_directory(directory, *, expect_scores: bool = False) -> dict[str, list[ObjectLabel]]:
    """Read every .txt label file in a directory, keyed by frame id."""
    directory = Path(directory)
    frames: dict[str, list[ObjectLabel]] = {}
    for path in sorted(directory.glob("*.txt")):
        frames[frame_id_of(path)] = parse_label_file(path.read_text(),
                                                     expect_scores=expect_scores,
                                                     path=path)
    return frames


def read_calib_directory(directory) -> dict[str, CalibrationSet]:
    directory = Path(directory)
    return {frame_id_of(p): parse_calib_file(p.read_text(), path=p)
            for p in sorted(directory.glob("*.txt"))}
