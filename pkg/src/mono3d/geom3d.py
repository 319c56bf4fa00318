"""Oriented 3D boxes in the rectified camera frame and the overlap kernels
built on them.

Conventions (camera frame): x right, y down, z forward. A box location is the
center of its bottom face; the box occupies y in [y - h, y]. yaw rotates about
the y axis, measured so that yaw = 0 points the length axis along +x.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .errors import GeometryError

if TYPE_CHECKING:
    from .kitti_io import CalibrationSet

TWO_PI = 2.0 * math.pi

# Inclusive tolerance for the half-plane tests inside the polygon clipper and
# for boundary containment checks.
CLIP_EPS = 1e-9


def wrap_angle(theta: float) -> float:
    """Normalize an angle to [-pi, pi).

    Values already in range are returned unchanged (bit-identical), which keeps
    parse/write round trips exact. theta = pi maps to -pi.
    """
    if -math.pi <= theta < math.pi:
        return theta
    return theta - TWO_PI * math.floor((theta + math.pi) / TWO_PI)


@dataclass(frozen=True)
class Box3D:
    """Oriented box: bottom-face center, (h, w, l) dimensions, yaw about y."""

    location: tuple[float, float, float]
    dimensions: tuple[float, float, float]
    yaw: float

    def __post_init__(self):
        h, w, l = self.dimensions
        if not (h > 0 and w > 0 and l > 0):
            raise GeometryError(f"box dimensions must be positive, got {self.dimensions}")
        object.__setattr__(self, "yaw", wrap_angle(float(self.yaw)))

    @property
    def volume(self) -> float:
        h, w, l = self.dimensions
        return h * w * l


def box_corners(box: Box3D) -> np.ndarray:
    """Return the 8 box corners, shape (8, 3).

    Rows 0-3 are the bottom face in counter-clockwise (x, z) order, rows 4-7
    the top face; corner i and corner i + 4 share the same (x, z).
    """
    x0, y0, z0 = box.location
    h, w, l = box.dimensions
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    # CCW footprint before rotation; rotation about y preserves orientation.
    local = [(l / 2, w / 2), (-l / 2, w / 2), (-l / 2, -w / 2), (l / 2, -w / 2)]
    corners = np.empty((8, 3), dtype=np.float64)
    for i, (lx, lz) in enumerate(local):
        cx = c * lx + s * lz + x0
        cz = -s * lx + c * lz + z0
        corners[i] = (cx, y0, cz)
        corners[i + 4] = (cx, y0 - h, cz)
    return corners


def bev_polygon(box: Box3D) -> np.ndarray:
    """Footprint of the box in the (x, z) ground plane, 4 vertices, CCW."""
    return box_corners(box)[:4, [0, 2]]


def polygon_area(poly) -> float:
    """Shoelace area of a simple polygon given as an (n, 2) array of vertices."""
    pts = [(float(p[0]), float(p[1])) for p in poly]
    n = len(pts)
    acc = 0.0
    for i in range(n):
        x0, z0 = pts[i]
        x1, z1 = pts[(i + 1) % n]
        acc += x0 * z1 - x1 * z0
    return abs(acc) * 0.5


def _clip_inside(px, pz, ax, az, ex, ez):
    # Left-of-edge test with inclusive tolerance: cross(edge, p - a) >= -eps.
    return ex * (pz - az) - ez * (px - ax) >= -CLIP_EPS


def _clip_intersect(p, q, ax, az, ex, ez):
    # Intersection of segment p-q with the infinite edge line through a along e.
    d1 = ex * (p[1] - az) - ez * (p[0] - ax)
    d2 = ex * (q[1] - az) - ez * (q[0] - ax)
    t = d1 / (d1 - d2)
    return (p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]))


def convex_intersection_area(p, q) -> float:
    """Area of the intersection of two convex CCW polygons.

    Sutherland-Hodgman clipping followed by the shoelace formula. Touching
    edges count as zero area. The two polygons are ordered canonically before
    clipping so the result is exactly symmetric in its arguments.
    """
    a = [(float(v[0]), float(v[1])) for v in p]
    b = [(float(v[0]), float(v[1])) for v in q]
    if tuple(b) < tuple(a):
        a, b = b, a
    out = a
    nb = len(b)
    for i in range(nb):
        if not out:
            return 0.0
        ax, az = b[i]
        bx, bz = b[(i + 1) % nb]
        ex, ez = bx - ax, bz - az
        src = out
        out = []
        prev = src[-1]
        prev_in = _clip_inside(prev[0], prev[1], ax, az, ex, ez)
        for cur in src:
            cur_in = _clip_inside(cur[0], cur[1], ax, az, ex, ez)
            if cur_in:
                if not prev_in:
                    out.append(_clip_intersect(prev, cur, ax, az, ex, ez))
                out.append(cur)
            elif prev_in:
                out.append(_clip_intersect(prev, cur, ax, az, ex, ez))
            prev, prev_in = cur, cur_in
    if len(out) < 3:
        return 0.0
    return polygon_area(out)


def iou_2d(a, b) -> float:
    """IoU of two axis-aligned image boxes (left, top, right, bottom)."""
    iw = min(a[2], b[2]) - max(a[0], b[0])
    ih = min(a[3], b[3]) - max(a[1], b[1])
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    union = area_a + area_b - inter
    if union <= 0:
        return 0.0
    return inter / union


def iou_2d_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise 2D IoU between (n, 4) and (m, 4) box arrays."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.clip(iw, 0, None) * np.clip(ih, 0, None)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    out = np.zeros_like(inter)
    np.divide(inter, union, out=out, where=union > 0)
    return out


def iou_bev(a: Box3D, b: Box3D) -> float:
    """Bird's-eye-view IoU of the two rotated footprints."""
    pa, pb = bev_polygon(a), bev_polygon(b)
    inter = convex_intersection_area(pa, pb)
    union = polygon_area(pa) + polygon_area(pb) - inter
    if union <= 0:
        return 0.0
    return inter / union


def iou_3d(a: Box3D, b: Box3D) -> float:
    """Volumetric IoU: footprint intersection times vertical overlap.

    Heights are derived from the rounded top/bottom coordinates so that
    identical boxes score exactly 1.0.
    """
    pa, pb = bev_polygon(a), bev_polygon(b)
    inter_bev = convex_intersection_area(pa, pb)
    ya, yb = a.location[1], b.location[1]
    top_a, top_b = ya - a.dimensions[0], yb - b.dimensions[0]
    inter = inter_bev * max(min(ya, yb) - max(top_a, top_b), 0.0)
    vol_a = polygon_area(pa) * (ya - top_a)
    vol_b = polygon_area(pb) * (yb - top_b)
    union = vol_a + vol_b - inter
    if union <= 0:
        return 0.0
    return inter / union


def contains_point(box: Box3D, point) -> bool:
    """Whether a 3D point lies inside the box, boundaries inclusive.

    A CLIP_EPS slack absorbs the rotation round-off so that box corners always
    count as contained.
    """
    px, py, pz = float(point[0]), float(point[1]), float(point[2])
    x0, y0, z0 = box.location
    h, w, l = box.dimensions
    if not (y0 - h - CLIP_EPS <= py <= y0 + CLIP_EPS):
        return False
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    dx, dz = px - x0, pz - z0
    # Inverse of the corner rotation.
    lx = c * dx - s * dz
    lz = s * dx + c * dz
    return abs(lx) <= l / 2 + CLIP_EPS and abs(lz) <= w / 2 + CLIP_EPS


def project_to_image(point, calib: "CalibrationSet") -> tuple[float, float]:
    """Pinhole projection of a rectified-frame point to pixel coordinates.

    Uses only the focal length and principal point, so any baseline offset in
    the projection matrix is deliberately ignored.
    """
    x, y, z = float(point[0]), float(point[1]), float(point[2])
    if z <= 0:
        raise GeometryError(f"cannot project point behind the camera (z={z})")
    cu, cv = calib.principal
    return (calib.focal * x / z + cu, calib.focal * y / z + cv)


def local_to_global_yaw(alpha: float, x: float, z: float) -> float:
    """Convert observation angle alpha to global yaw: r_y = alpha + atan2(x, z)."""
    if z <= 0:
        raise GeometryError(f"yaw conversion needs z > 0, got z={z}")
    return wrap_angle(alpha + math.atan2(x, z))
