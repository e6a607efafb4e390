"""
Pinhole camera model, back-projection and per-pixel normals from depth.
"""

import math
from typing import Tuple

import numpy as np

from src.errors import BehindCameraError, InvalidInputError
from src.models.camera import DepthMap, Intrinsics, NormalMap, Point3

# (row, col) offsets, counterclockwise from East in image orientation (North = up).
NEIGHBORS = {
    "E": (0, 1),
    "NE": (-1, 1),
    "N": (-1, 0),
    "NW": (-1, -1),
    "W": (0, -1),
    "SW": (1, -1),
    "S": (1, 0),
    "SE": (1, 1),
}

# Orthogonal neighbor pairs; each cross product points the same way on a plane.
NEIGHBOR_PAIRS = (
    ("E", "N"),
    ("NE", "NW"),
    ("N", "W"),
    ("NW", "SW"),
    ("W", "S"),
    ("SW", "SE"),
    ("S", "E"),
    ("SE", "NE"),
)


def backproject(intr: Intrinsics, pixel: Tuple[float, float], depth: float) -> Point3:
    """Lift pixel (u, v) at z-depth `depth` into the camera frame."""
    if not (depth > 0 and math.isfinite(depth)):
        raise InvalidInputError(f"Depth must be positive and finite, got {depth}")
    u, v = pixel
    return Point3((u - intr.cx) / intr.fx * depth, (v - intr.cy) / intr.fy * depth, depth)


def project(intr: Intrinsics, point: Point3) -> Tuple[Tuple[float, float], float]:
    """Project a camera-frame point; the pixel may fall outside the image."""
    x, y, z = point
    if not z > 0:
        raise BehindCameraError(f"Point {tuple(point)} is behind the camera")
    return (intr.fx * x / z + intr.cx, intr.fy * y / z + intr.cy), z


def pixel_rays(intr: Intrinsics, shape: Tuple[int, int]) -> np.ndarray:
    """Per-pixel rays scaled to unit z, shape (H, W, 3)."""
    height, width = shape
    v, u = np.mgrid[0:height, 0:width].astype(np.float64)
    rays = np.empty((height, width, 3))
    rays[..., 0] = (u - intr.cx) / intr.fx
    rays[..., 1] = (v - intr.cy) / intr.fy
    rays[..., 2] = 1.0
    return rays


def backproject_depth(depth: DepthMap, intr: Intrinsics) -> np.ndarray:
    """Point cloud of a depth map, (H, W, 3), NaN at invalid pixels."""
    points = pixel_rays(intr, depth.shape) * depth.values[..., None]
    points[~depth.valid] = np.nan
    return points


def shifted(array: np.ndarray, offset: Tuple[int, int]) -> np.ndarray:
    """Interior view of `array` displaced by a (row, col) offset of at most one pixel."""
    dv, du = offset
    height, width = array.shape[:2]
    return array[1 + dv : height - 1 + dv, 1 + du : width - 1 + du]


def accumulated_normals(points: np.ndarray) -> np.ndarray:
    """Unnormalized sum of the eight neighbor cross products for interior pixels."""
    center = shifted(points, (0, 0))
    total = np.zeros_like(center)
    for first, second in NEIGHBOR_PAIRS:
        a = shifted(points, NEIGHBORS[first]) - center
        b = shifted(points, NEIGHBORS[second]) - center
        total += np.cross(a, b)
    return total


def normal_map(depth: DepthMap, intr: Intrinsics) -> NormalMap:
    """Unit normals facing the camera; border pixels and incomplete neighborhoods are invalid."""
    height, width = depth.shape
    vectors = np.full((height, width, 3), np.nan)
    valid = np.zeros((height, width), dtype=bool)
    if height < 3 or width < 3:
        return NormalMap(vectors, valid)

    points = backproject_depth(depth, intr)
    depth_valid = depth.valid
    neighborhood = shifted(depth_valid, (0, 0)).copy()
    for offset in NEIGHBORS.values():
        neighborhood &= shifted(depth_valid, offset)

    with np.errstate(invalid="ignore"):
        total = accumulated_normals(points)
        center = shifted(points, (0, 0))
        facing_away = np.einsum("ijk,ijk->ij", total, center) > 0
        total[facing_away] *= -1.0
        length = np.linalg.norm(total, axis=-1)
        interior_valid = neighborhood & np.isfinite(length) & (length > 0)
        unit = total / np.where(interior_valid, length, 1.0)[..., None]

    unit[~interior_valid] = np.nan
    vectors[1:-1, 1:-1] = unit
    valid[1:-1, 1:-1] = interior_valid
    return NormalMap(vectors, valid)
