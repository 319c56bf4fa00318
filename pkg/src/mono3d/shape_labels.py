"""Instance-mask training labels derived from LiDAR points.

A mask is an s x s grid over an object's 2D box. Rectified-frame points ahead
of the camera are projected into the grid; every cell that receives at least
one point takes the foreground/background label of one of its points, chosen
by a seeded draw, and empty cells stay unknown (-1).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .errors import FormatError, ValidationError
from .geom3d import Box3D, contains_point

if TYPE_CHECKING:
    from .kitti_io import CalibrationSet

DEFAULT_GRID_SIZE = 28

UNKNOWN = -1
BACKGROUND = 0
FOREGROUND = 1


@dataclass(frozen=True, eq=False)
class MaskGrid:
    """Labels is an (s, s) int8 array over {1, 0, -1}; row 0 is the roi top."""

    size: int
    labels: np.ndarray


def _cell_rng(seed: int, row: int, col: int) -> np.random.Generator:
    # Keyed per cell so the draw is independent of visit order and parallelism.
    return np.random.default_rng([seed, row, col])


def generate_mask(box: Box3D, cloud_rect: np.ndarray,
                  roi: tuple[float, float, float, float], s: int,
                  calib: "CalibrationSet", seed: int) -> MaskGrid:
    """Rasterize LiDAR foreground labels for one target box.

    cloud_rect holds rectified-frame points, (n, 3). roi is the object's 2D
    box (left, top, right, bottom). Cells with at least one projected point
    take the label of one point drawn with the (seed, row, col)-keyed
    generator: 1 if that point lies inside the target box, else 0. Points
    from other instances or the background therefore label their cell 0.
    Cells with no points stay -1.
    """
    if s < 1:
        raise ValidationError(f"grid size must be >= 1, got {s}")
    left, top, right, bottom = (float(v) for v in roi)
    if not (right > left and bottom > top):
        raise ValidationError(f"degenerate roi {roi}")
    labels = np.full((s, s), UNKNOWN, dtype=np.int8)

    pts = np.asarray(cloud_rect, dtype=np.float64).reshape(-1, 3)
    pts = pts[pts[:, 2] > 0]
    if len(pts) == 0:
        return MaskGrid(s, labels)

    f = calib.focal
    cu, cv = calib.principal
    u = f * pts[:, 0] / pts[:, 2] + cu
    v = f * pts[:, 1] / pts[:, 2] + cv
    cols = np.floor((u - left) / (right - left) * s).astype(np.int64)
    rows = np.floor((v - top) / (bottom - top) * s).astype(np.int64)
    keep = (cols >= 0) & (cols < s) & (rows >= 0) & (rows < s)

    cells: dict[tuple[int, int], list[int]] = {}
    for idx in np.nonzero(keep)[0]:
        cells.setdefault((int(rows[idx]), int(cols[idx])), []).append(int(idx))

    for (r, c), members in cells.items():
        if len(members) == 1:
            chosen = members[0]
        else:
            chosen = members[_cell_rng(seed, r, c).integers(len(members))]
        inside = contains_point(box, pts[chosen])
        labels[r, c] = FOREGROUND if inside else BACKGROUND
    return MaskGrid(s, labels)


def position_embedding(s: int) -> np.ndarray:
    """Normalized coordinate embedding, shape (s, s, 2).

    Entry [row, col] is (col / s - 0.5, row / s - 0.5), i.e. channel 0 is the
    horizontal coordinate; both channels lie in [-0.5, 0.5).
    """
    if s < 1:
        raise ValidationError(f"grid size must be >= 1, got {s}")
    coords = np.arange(s, dtype=np.float64) / s - 0.5
    out = np.empty((s, s, 2), dtype=np.float64)
    out[..., 0] = coords[None, :]
    out[..., 1] = coords[:, None]
    return out


def center_sampling(centers: Sequence[tuple[float, float]],
                    lattice: tuple[int, int]) -> np.ndarray:
    """Assign heatmap pixels near object centers to their nearest object.

    centers are (u, v) coordinates on a lattice of (width, height). Every
    pixel inside the 3x3 neighborhood of some center (clipped at the border)
    is assigned the index of the Euclidean-nearest center, ties going to the
    lowest object index. Returns an (height, width) int array, -1 elsewhere.
    """
    width, height = lattice
    if width < 1 or height < 1:
        raise ValidationError(f"lattice must be positive, got {lattice}")
    assignment = np.full((height, width), -1, dtype=np.int64)
    best = np.full((height, width), np.inf, dtype=np.float64)
    for idx, (u, v) in enumerate(centers):
        if not (0 <= u < width and 0 <= v < height):
            raise ValidationError(f"center {idx} at ({u}, {v}) outside lattice {lattice}")
        ci, cj = int(round(v)), int(round(u))
        for r in range(max(ci - 1, 0), min(ci + 2, height)):
            for c in range(max(cj - 1, 0), min(cj + 2, width)):
                d = (c - u) ** 2 + (r - v) ** 2
                if d < best[r, c]:  # strict: earlier (lower) index wins ties
                    best[r, c] = d
                    assignment[r, c] = idx
    return assignment


def write_mask(grid: MaskGrid) -> str:
    """Serialize a mask: one "s=<n>" header line then s rows of s labels."""
    lines = [f"s={grid.size}"]
    for row in grid.labels:
        lines.append(" ".join(str(int(v)) for v in row))
    return "\n".join(lines) + "\n"


def parse_mask(text: str, path=None) -> MaskGrid:
    """Inverse of write_mask."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("s="):
        raise FormatError("mask file must start with an 's=<n>' header", path, 1)
    try:
        s = int(lines[0][2:])
    except ValueError:
        raise FormatError(f"bad mask header {lines[0]!r}", path, 1) from None
    if s < 1 or len(lines) != s + 1:
        raise FormatError(f"mask body must have {s} rows, got {len(lines) - 1}", path)
    labels = np.full((s, s), UNKNOWN, dtype=np.int8)
    for r, line in enumerate(lines[1:]):
        values = line.split()
        if len(values) != s:
            raise FormatError(f"mask row needs {s} values, got {len(values)}", path, r + 2)
        for c, tok in enumerate(values):
            if tok not in ("-1", "0", "1"):
                raise FormatError(f"mask label must be -1, 0 or 1, got {tok!r}", path, r + 2)
            labels[r, c] = int(tok)
    return MaskGrid(s, labels)
