"""
Geometric plausibility filter for objects before scale aggregation.
"""

import logging
from typing import Iterable, Mapping, Set

import numpy as np

from src.errors import DegenerateGeometryError, HorizonAtInfinityError, InvalidInputError
from src.models.camera import Intrinsics
from src.models.scene import HorizonLine, ObjectInstance

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.2


def horizon_line(intr: Intrinsics, normal: np.ndarray) -> HorizonLine:
    """Image of the ground plane's line at infinity, l = K^-T n."""
    normal = np.asarray(normal, dtype=np.float64)
    length = np.linalg.norm(normal)
    if not length > 0:
        raise InvalidInputError("Road normal has zero length")
    normal = normal / length
    if np.hypot(normal[0], normal[1]) < 1e-9:
        raise HorizonAtInfinityError("Road normal is parallel to the optical axis")

    a, b, c = np.linalg.inv(intr.matrix).T @ normal
    return HorizonLine(float(a), float(b), float(c))


def approx_object_height(instance: ObjectInstance, horizon: HorizonLine, camera_height: float) -> float:
    """Metric height from similar triangles: (h_obj / h_cam) * H*."""
    if not camera_height > 0:
        raise InvalidInputError(f"Camera height must be positive, got {camera_height}")

    v, u = np.nonzero(instance.mask)
    h_cam = float(np.max(horizon.distance(u.astype(np.float64), v.astype(np.float64))))
    if h_cam < 1.0:
        raise DegenerateGeometryError(f"Instance {instance.id} sits on the horizon ({h_cam:.3f} px)")
    h_obj = instance.bbox.height_px
    return h_obj / h_cam * camera_height


def is_outlier(prior: float, approx: float, threshold: float = DEFAULT_THRESHOLD) -> bool:
    """Relative gap strictly above the threshold."""
    return abs(prior - approx) / prior > threshold


def filter_outliers(
    priors: Mapping[int, float],
    approximations: Mapping[int, float],
    threshold: float = DEFAULT_THRESHOLD,
) -> Set[int]:
    """Ids whose approximate height agrees with the prior within the threshold."""
    if not threshold > 0:
        raise InvalidInputError(f"Threshold must be positive, got {threshold}")

    inliers = set()
    for object_id, approx in approximations.items():
        prior = priors.get(object_id)
        if prior is None:
            continue
        if is_outlier(prior, approx, threshold):
            logger.debug("Object %s rejected: prior %.3f, approx %.3f", object_id, prior, approx)
        else:
            inliers.add(object_id)
    return inliers


def approximate_heights(
    instances: Iterable[ObjectInstance], horizon: HorizonLine, camera_height: float
) -> Mapping[int, float]:
    """Approximate heights of all instances that are not degenerate."""
    heights = {}
    for instance in instances:
        try:
            heights[instance.id] = approx_object_height(instance, horizon, camera_height)
        except DegenerateGeometryError as e:
            logger.debug("Object %s excluded: %s", instance.id, e)
    return heights
