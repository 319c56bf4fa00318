"""Decoding of monocular network outputs into 3D boxes.

The decoder consumes per-object head outputs: a heatmap-cell center plus a
sub-cell offset, depth estimates with uncertainties (one direct regression and
three derived from projected keypoint lines), log-space dimension offsets
against per-class means, and MultiBin orientation channels.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Mapping, Sequence

import numpy as np

from .errors import GeometryError, ValidationError
from .geom3d import Box3D, box_corners, local_to_global_yaw, project_to_image, wrap_angle

if TYPE_CHECKING:
    from .kitti_io import CalibrationSet


@dataclass(frozen=True)
class KeypointSet:
    """Ten projected keypoints of a box, shape (10, 2) pixel coordinates.

    Rows 0-3 are bottom corners, rows 4-7 the matching top corners (vertical
    line i joins rows i and i + 4), row 8 is the bottom-face center and row 9
    the top-face center (the fifth vertical line).
    """

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.shape != (10, 2):
            raise ValidationError(f"keypoint set must be (10, 2), got {pts.shape}")
        object.__setattr__(self, "points", pts)


@dataclass(frozen=True)
class DepthEstimate:
    """One depth hypothesis with its predicted standard deviation."""

    z: float
    sigma: float

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValidationError(f"sigma must be positive and finite, got {self.sigma}")


# Rounded per-class size statistics (h, w, l in meters); override per dataset.
DEFAULT_MEAN_DIMS: Mapping[str, tuple[float, float, float]] = {
    "Car": (1.5, 1.6, 3.9),
    "Van": (2.2, 1.9, 5.1),
    "Truck": (3.2, 2.6, 10.0),
    "Pedestrian": (1.8, 0.6, 0.8),
    "Person_sitting": (1.3, 0.6, 0.8),
    "Cyclist": (1.7, 0.6, 1.8),
    "Tram": (3.5, 2.5, 16.0),
}


@dataclass(frozen=True)
class DecoderConfig:
    """Head layout shared by encoding and decoding."""

    class_mean_dims: Mapping[str, tuple[float, float, float]]
    downsample: int = 4
    num_bins: int = 4

    def __post_init__(self):
        if self.downsample < 1:
            raise ValidationError(f"downsample must be >= 1, got {self.downsample}")
        if self.num_bins < 2:
            raise ValidationError(f"num_bins must be >= 2, got {self.num_bins}")

    @classmethod
    def default(cls) -> "DecoderConfig":
        return cls(dict(DEFAULT_MEAN_DIMS))


def depth_from_line(focal: float, h3d: float, h_px: float) -> float:
    """Depth of a vertical box line from its pixel height: z = f * h / h_px."""
    if h_px <= 0:
        raise GeometryError(f"degenerate keypoint line (pixel height {h_px})")
    return focal * h3d / h_px


# Both endpoints of each vertical line share one (x, z), so its recovered depth
# is the depth of that edge; diagonal corner pairs average to the exact center
# depth. Lines shorter than this many pixels are rejected as degenerate.
MIN_LINE_PIXELS = 0.5

_LINE_PAIRS = ((0, 4), (1, 5), (2, 6), (3, 7), (8, 9))


def line_pixel_heights(keypoints: KeypointSet) -> list[float]:
    """Pixel heights of the five vertical lines (bottom v minus top v)."""
    pts = keypoints.points
    return [float(pts[b, 1] - pts[t, 1]) for b, t in _LINE_PAIRS]


def group_line_depths(keypoints: KeypointSet, focal: float, h3d: float) -> tuple[float, float, float]:
    """Three depth estimates from the keypoint lines.

    Group A averages the diagonal corner lines {1, 3}, group B the diagonal
    pair {2, 4}, group C is the center line (1-indexed line numbers).
    """
    heights = line_pixel_heights(keypoints)
    for i, h_px in enumerate(heights):
        if h_px <= MIN_LINE_PIXELS:
            raise GeometryError(f"degenerate keypoint line {i + 1} (pixel height {h_px:g})")
    z = [depth_from_line(focal, h3d, h_px) for h_px in heights]
    return ((z[0] + z[2]) / 2.0, (z[1] + z[3]) / 2.0, z[4])


def fuse_depths(estimates: Sequence[DepthEstimate]) -> float:
    """Uncertainty-weighted soft fusion: z = sum(z_i / s_i) / sum(1 / s_i)."""
    if not estimates:
        raise ValidationError("cannot fuse an empty depth ensemble")
    num = sum(e.z / e.sigma for e in estimates)
    den = sum(1.0 / e.sigma for e in estimates)
    return num / den


def decode_center(u_f: float, v_f: float, delta: tuple[float, float],
                  config: DecoderConfig) -> tuple[float, float]:
    """Feature-map cell plus sub-cell offset to pixel coordinates."""
    s0 = float(config.downsample)
    return (s0 * u_f + delta[0], s0 * v_f + delta[1])


def backproject(u: float, v: float, z: float, calib: "CalibrationSet") -> tuple[float, float, float]:
    """Invert the pinhole projection at known depth."""
    if z <= 0:
        raise GeometryError(f"backprojection needs z > 0, got {z}")
    cu, cv = calib.principal
    f = calib.focal
    return ((u - cu) * z / f, (v - cv) * z / f, z)


def decode_dimensions(class_name: str, deltas: tuple[float, float, float],
                      config: DecoderConfig) -> tuple[float, float, float]:
    """Per-class mean dimensions scaled by exp of the regressed offsets."""
    if class_name not in config.class_mean_dims:
        raise ValidationError(f"no mean dimensions registered for class {class_name!r}")
    mean = config.class_mean_dims[class_name]
    return tuple(m * math.exp(d) for m, d in zip(mean, deltas))


def bin_center(k: int, num_bins: int) -> float:
    """Center of orientation bin k; bins evenly partition [-pi, pi)."""
    return -math.pi + (2 * k + 1) * math.pi / num_bins


def bin_of(alpha: float, num_bins: int) -> int:
    """Index of the bin containing alpha."""
    a = wrap_angle(alpha)
    k = int((a + math.pi) / (2.0 * math.pi / num_bins))
    return min(k, num_bins - 1)


def multibin_decode(bin_logits: Sequence[float], sincos: Sequence[tuple[float, float]]) -> float:
    """Observation angle from MultiBin channels.

    The winning bin is the logit argmax (ties go to the lowest index); the
    angle is the bin center plus atan2 of that bin's (sin, cos) residual.
    """
    if len(bin_logits) != len(sincos):
        raise ValidationError("bin logits and residual channels disagree in length")
    num_bins = len(bin_logits)
    if num_bins < 2:
        raise ValidationError(f"need at least 2 orientation bins, got {num_bins}")
    best = max(range(num_bins), key=lambda i: (bin_logits[i], -i))
    s, c = sincos[best]
    if s == 0.0 and c == 0.0:
        raise GeometryError(f"degenerate orientation residual in bin {best}")
    return wrap_angle(bin_center(best, num_bins) + math.atan2(s, c))


def multibin_encode(alpha: float, num_bins: int) -> tuple[list[float], list[tuple[float, float]]]:
    """Inverse of multibin_decode for target/fixture construction.

    Returns one-hot logits for the containing bin and per-bin (sin, cos) of the
    residual against that bin's center (other bins carry the same residual
    encoding of zero offset).
    """
    b = bin_of(alpha, num_bins)
    residual = wrap_angle(wrap_angle(alpha) - bin_center(b, num_bins))
    logits = [1.0 if i == b else 0.0 for i in range(num_bins)]
    sincos = [(math.sin(residual), math.cos(residual)) if i == b else (0.0, 1.0)
              for i in range(num_bins)]
    return logits, sincos


def project_box_2d(box: Box3D, calib: "CalibrationSet") -> tuple[float, float, float, float]:
    """Axis-aligned pixel bounds of the projected box corners (unclipped)."""
    pts = np.array([project_to_image(c, calib) for c in box_corners(box)])
    return (float(pts[:, 0].min()), float(pts[:, 1].min()),
            float(pts[:, 0].max()), float(pts[:, 1].max()))


def assemble_box(center2d: tuple[float, float],
                 depth_estimates: Sequence[DepthEstimate],
                 dim_deltas: tuple[float, float, float],
                 bin_logits: Sequence[float],
                 sincos: Sequence[tuple[float, float]],
                 class_name: str,
                 calib: "CalibrationSet",
                 config: DecoderConfig) -> Box3D:
    """Compose the full decode: fused depth, backprojected center, dimensions
    and orientation. center2d is the projected volumetric box center in pixels;
    the returned location is the KITTI bottom-face center (y shifted by +h/2).
    """
    z = fuse_depths(depth_estimates)
    if z <= 0:
        raise GeometryError(f"fused depth must be positive, got {z:g}")
    x, y, z = backproject(center2d[0], center2d[1], z, calib)
    h, w, l = decode_dimensions(class_name, dim_deltas, config)
    alpha = multibin_decode(bin_logits, sincos)
    yaw = local_to_global_yaw(alpha, x, z)
    return Box3D((x, y + h / 2.0, z), (h, w, l), yaw)


@dataclass(frozen=True)
class BoxObservations:
    """Everything assemble_box consumes, as produced by encode_observations."""

    center2d: tuple[float, float]
    keypoints: KeypointSet
    depth_estimates: tuple[DepthEstimate, ...]
    dim_deltas: tuple[float, float, float]
    bin_logits: tuple[float, ...]
    sincos: tuple[tuple[float, float], ...]
    alpha: float


def encode_observations(box: Box3D, class_name: str, calib: "CalibrationSet",
                        config: DecoderConfig,
                        sigmas: Sequence[float] = (1.0, 1.0, 1.0, 1.0)) -> BoxObservations:
    """Render decode inputs from a known box (for targets, fixtures, tests).

    The four depth estimates are the direct depth and the three keypoint-line
    group depths, each paired with the given sigma. With exact inputs the
    decode round trip reproduces the box.
    """
    if len(sigmas) != 4:
        raise ValidationError(f"need 4 sigmas (direct + 3 groups), got {len(sigmas)}")
    x0, y0, z0 = box.location
    h = box.dimensions[0]
    corners = box_corners(box)
    pts = np.empty((10, 2), dtype=np.float64)
    for i in range(8):
        pts[i] = project_to_image(corners[i], calib)
    pts[8] = project_to_image((x0, y0, z0), calib)
    pts[9] = project_to_image((x0, y0 - h, z0), calib)
    keypoints = KeypointSet(pts)

    center2d = project_to_image((x0, y0 - h / 2.0, z0), calib)
    za, zb, zc = group_line_depths(keypoints, calib.focal, h)
    estimates = (DepthEstimate(z0, float(sigmas[0])),
                 DepthEstimate(za, float(sigmas[1])),
                 DepthEstimate(zb, float(sigmas[2])),
                 DepthEstimate(zc, float(sigmas[3])))

    if class_name not in config.class_mean_dims:
        raise ValidationError(f"no mean dimensions registered for class {class_name!r}")
    mean = config.class_mean_dims[class_name]
    deltas = tuple(math.log(d / m) for d, m in zip(box.dimensions, mean))

    alpha = wrap_angle(box.yaw - math.atan2(x0, z0))
    logits, sincos = multibin_encode(alpha, config.num_bins)
    return BoxObservations(center2d, keypoints, estimates, deltas,
                           tuple(logits), tuple(sincos), alpha)
