"""
Silhouette heights of objects above the road plane and the per-frame scale
factor they imply.

Heights are measured directly along the road normal. This equals the
orthographic projection onto any plane parallel to the normal, since such a
projection keeps the distance to the ground plane.
"""

import logging
from typing import Dict, List, Mapping, Sequence

import numpy as np

from src.errors import InvalidInputError, NoScaleError
from src.models.camera import DepthMap, Intrinsics
from src.models.scene import FrameCameraHeight, FrameScale, ObjectInstance, SilhouetteMeasurement
from src.services.geometry import backproject_depth

logger = logging.getLogger(__name__)


def height_above_plane(points: np.ndarray, normal: np.ndarray, camera_height: float) -> np.ndarray:
    """Signed height of points over the plane {x : n.x + H = 0}."""
    return points @ normal + camera_height


def silhouette_height(
    depth: DepthMap,
    intr: Intrinsics,
    instance: ObjectInstance,
    normal: np.ndarray,
    camera_height: float,
) -> SilhouetteMeasurement:
    """Highest point of the instance over the frame's own (unscaled) ground plane."""
    if instance.mask.shape != depth.shape:
        raise InvalidInputError(f"Instance {instance.id} mask does not match the depth map")
    if not camera_height > 0:
        raise InvalidInputError(f"Camera height must be positive, got {camera_height}")

    usable = instance.mask & depth.valid
    if not usable.any():
        logger.debug("Instance %s has no valid depth", instance.id)
        return SilhouetteMeasurement(object_id=instance.id, height=float("nan"), valid=False)

    points = backproject_depth(depth, intr)[usable]
    height = float(np.max(height_above_plane(points, np.asarray(normal, dtype=np.float64), camera_height)))
    if not height > 0:
        logger.debug("Instance %s lies below the ground plane (%.4f)", instance.id, height)
        return SilhouetteMeasurement(object_id=instance.id, height=height, valid=False)
    return SilhouetteMeasurement(object_id=instance.id, height=height, valid=True)


def object_scale_factors(
    measurements: Sequence[SilhouetteMeasurement], priors: Mapping[int, float]
) -> Dict[int, float]:
    """s_k = prior_k / silhouette_k for valid measurements that have a prior."""
    factors = {}
    for measurement in measurements:
        prior = priors.get(measurement.object_id)
        if not measurement.valid or prior is None:
            continue
        factors[measurement.object_id] = prior / measurement.height
    return factors


def frame_scale_factor(measurements: Sequence[SilhouetteMeasurement], priors: Mapping[int, float]) -> FrameScale:
    """Median of the per-object scale factors."""
    factors: List[float] = list(object_scale_factors(measurements, priors).values())
    if not factors:
        raise NoScaleError("No valid object with a height prior in this frame")
    return FrameScale(s=float(np.median(factors)), count=len(factors))


def scaled_camera_height(camera_height: FrameCameraHeight, frame_scale: FrameScale) -> FrameCameraHeight:
    """Metric camera height s * H'."""
    if camera_height.scaled:
        raise InvalidInputError("Camera height is already scaled")
    return FrameCameraHeight(value=frame_scale.s * camera_height.value, scaled=True)
