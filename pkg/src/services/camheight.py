"""
Per-pixel and per-frame unscaled camera height from road pixels, and the
shared road normal.
"""

import logging

import numpy as np

from src.errors import DegenerateGeometryError, FrameUnusableError, InvalidInputError
from src.models.camera import DepthMap, Intrinsics, NormalMap
from src.models.scene import FrameCameraHeight
from src.services.geometry import backproject_depth

logger = logging.getLogger(__name__)


def _check_shapes(road_mask: np.ndarray, *shapes):
    for shape in shapes:
        if tuple(shape) != road_mask.shape:
            raise InvalidInputError(f"Road mask {road_mask.shape} does not match map dimensions {tuple(shape)}")


def per_pixel_camera_height(
    depth: DepthMap, normals: NormalMap, road_mask: np.ndarray, intr: Intrinsics
) -> np.ndarray:
    """H'(p) = -phi(p) . n(p) on road pixels with a valid normal; NaN elsewhere."""
    road_mask = np.asarray(road_mask, dtype=bool)
    _check_shapes(road_mask, depth.shape, normals.shape)

    points = backproject_depth(depth, intr)
    usable = road_mask & normals.valid & depth.valid
    heights = np.full(depth.shape, np.nan)
    heights[usable] = -np.einsum("ij,ij->i", points[usable], normals.vectors[usable])
    return heights


def frame_camera_height(height_map: np.ndarray, road_mask: np.ndarray) -> FrameCameraHeight:
    """Median of the valid road-pixel heights (unscaled)."""
    road_mask = np.asarray(road_mask, dtype=bool)
    _check_shapes(road_mask, height_map.shape)
    if not road_mask.any():
        raise FrameUnusableError("Road mask is empty")

    values = height_map[road_mask]
    values = values[np.isfinite(values)]
    if values.size == 0:
        raise FrameUnusableError("No road pixel has a valid camera height")

    height = float(np.median(values))
    if not height > 0:
        raise DegenerateGeometryError(f"Median road height is not positive ({height})")
    logger.debug("Frame camera height %.4f from %d road pixels", height, values.size)
    return FrameCameraHeight(value=height, scaled=False)


def road_normal(normals: NormalMap, road_mask: np.ndarray) -> np.ndarray:
    """Component-wise median of valid road normals, renormalized."""
    road_mask = np.asarray(road_mask, dtype=bool)
    _check_shapes(road_mask, normals.shape)

    usable = road_mask & normals.valid
    if not usable.any():
        raise FrameUnusableError("No valid normal inside the road mask")

    median = np.median(normals.vectors[usable], axis=0)
    length = float(np.linalg.norm(median))
    if not length > 0:
        raise DegenerateGeometryError("Median road normal has zero length")
    return median / length
