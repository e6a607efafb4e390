"""
Analytic gradient of the scale terms (camera-height and auxiliary geometric
losses) with respect to the depth map, per pixel or through one global
log-scale parameter.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.errors import InvalidInputError, UndefinedLossError
from src.models.camera import DepthMap, Intrinsics
from src.models.losses import LossWeights
from src.models.scene import ObjectInstance
from src.services.camheight import per_pixel_camera_height
from src.services.geometry import (
    NEIGHBOR_PAIRS,
    NEIGHBORS,
    accumulated_normals,
    backproject_depth,
    normal_map,
    pixel_rays,
    shifted,
)
from src.services.losses import approx_object_depth, aux_geometric_loss, camera_height_loss

logger = logging.getLogger(__name__)


class GradientMode(str, Enum):
    PER_PIXEL = "per-pixel"
    GLOBAL_LOG_SCALE = "global-log-scale"


@dataclass(frozen=True, eq=False)
class ScaleLossInputs:
    """Everything besides depth that the scale terms of one frame need.

    `h_star=None` drops the camera-height term; an empty `instances` list
    drops the auxiliary term.
    """

    intr: Intrinsics
    road_mask: np.ndarray
    h_star: Optional[float] = None
    instances: Sequence[ObjectInstance] = field(default_factory=list)
    priors: Dict[int, float] = field(default_factory=dict)
    lambda_cam: float = 1.0
    lambda_aux: float = 1.0
    weights: LossWeights = LossWeights()


def _camera_terms(depth: DepthMap, inputs: ScaleLossInputs):
    normals = normal_map(depth, inputs.intr)
    heights = per_pixel_camera_height(depth, normals, inputs.road_mask, inputs.intr)
    return normals, heights


def scale_loss(depth: DepthMap, inputs: ScaleLossInputs) -> float:
    """alpha * lambda_cam * L_cam + beta * lambda_aux * L_aux at the given depth."""
    total = 0.0
    present = False
    if inputs.h_star is not None:
        _, heights = _camera_terms(depth, inputs)
        cam = camera_height_loss(heights, inputs.road_mask, inputs.h_star)
        total += inputs.weights.alpha * inputs.lambda_cam * cam
        present = True
    aux = aux_geometric_loss(depth, inputs.instances, inputs.priors, inputs.intr)
    if aux is not None:
        total += inputs.weights.beta * inputs.lambda_aux * aux
        present = True
    if not present:
        raise UndefinedLossError("Neither the camera-height nor the auxiliary term is defined")
    return total


def _add_at(target: np.ndarray, offset, values: np.ndarray):
    dv, du = offset
    height, width = target.shape[:2]
    target[1 + dv : height - 1 + dv, 1 + du : width - 1 + du] += values


def _camera_height_gradient(depth: DepthMap, inputs: ScaleLossInputs) -> np.ndarray:
    """d L_cam / d depth through the per-pixel normals."""
    normals, heights = _camera_terms(depth, inputs)
    road = np.asarray(inputs.road_mask, dtype=bool)
    usable = road & np.isfinite(heights)
    count = int(usable.sum())
    if count == 0:
        raise UndefinedLossError("No valid road pixel for the camera-height loss")

    # Upstream coefficient per pixel; zero away from usable road pixels and at ties.
    coefficient = np.zeros(depth.shape)
    coefficient[usable] = np.sign(heights[usable] - inputs.h_star) / count

    points = np.nan_to_num(backproject_depth(depth, inputs.intr))
    center = shifted(points, (0, 0))
    raw = accumulated_normals(points)
    length = np.linalg.norm(raw, axis=-1)
    coeff = shifted(coefficient, (0, 0))
    active = coeff != 0
    safe_length = np.where(active, length, 1.0)

    unit = shifted(normals.vectors, (0, 0))
    unit = np.where(active[..., None], unit, 0.0)
    # Orientation flip applied when the normal was computed.
    sigma = np.where(np.einsum("ijk,ijk->ij", raw, center) > 0, -1.0, 1.0)

    # dH/dm for H = -phi . (sigma m / |m|)
    along = np.einsum("ijk,ijk->ij", center, unit)[..., None] * unit
    w = -(sigma / safe_length)[..., None] * (center - along)
    w *= coeff[..., None]

    grad_points = np.zeros_like(points)
    _add_at(grad_points, (0, 0), -unit * coeff[..., None])
    for first, second in NEIGHBOR_PAIRS:
        a = shifted(points, NEIGHBORS[first]) - center
        b = shifted(points, NEIGHBORS[second]) - center
        grad_a = np.cross(b, w)
        grad_b = np.cross(w, a)
        _add_at(grad_points, NEIGHBORS[first], grad_a)
        _add_at(grad_points, NEIGHBORS[second], grad_b)
        _add_at(grad_points, (0, 0), -(grad_a + grad_b))

    rays = pixel_rays(inputs.intr, depth.shape)
    gradient = np.einsum("ijk,ijk->ij", rays, grad_points)
    gradient[~depth.valid] = 0.0
    return gradient


def _aux_gradient(depth: DepthMap, inputs: ScaleLossInputs) -> Optional[np.ndarray]:
    gradient = np.zeros(depth.shape)
    contributing = []
    for instance in inputs.instances:
        prior = inputs.priors.get(instance.id)
        if prior is None:
            continue
        usable = instance.mask & depth.valid
        if not usable.any():
            continue
        target = approx_object_depth(prior, instance.bbox.height_px, inputs.intr.fy)
        contributing.append((usable, target))
    if not contributing:
        return None

    for usable, target in contributing:
        gradient[usable] += np.sign(depth.values[usable] - target) / (len(contributing) * usable.sum())
    return gradient


def _per_pixel(depth: DepthMap, inputs: ScaleLossInputs) -> np.ndarray:
    weights = inputs.weights
    gradient = np.zeros(depth.shape)
    present = False
    if inputs.h_star is not None:
        gradient += weights.alpha * inputs.lambda_cam * _camera_height_gradient(depth, inputs)
        present = True
    aux = _aux_gradient(depth, inputs)
    if aux is not None:
        gradient += weights.beta * inputs.lambda_aux * aux
        present = True
    if not present:
        raise UndefinedLossError("Neither the camera-height nor the auxiliary term is defined")
    return gradient


@dataclass(frozen=True, eq=False)
class LogScaleTerms:
    """Scale terms of one frame as a function of a global log-scale s applied to its depth.

    Per-pixel heights and depths both scale with e^s, so the heights are
    computed once at s = 0 and every later evaluation is closed form.
    """

    heights: Optional[np.ndarray]
    h_star: Optional[float]
    objects: List[Tuple[np.ndarray, float]]
    cam_weight: float
    aux_weight: float

    def loss(self, s: float) -> float:
        factor = math.exp(s)
        total = 0.0
        if self.heights is not None:
            total += self.cam_weight * float(np.mean(np.abs(factor * self.heights - self.h_star)))
        if self.objects:
            aux = np.mean([np.mean(np.abs(factor * d - target)) for d, target in self.objects])
            total += self.aux_weight * float(aux)
        return total

    def derivative(self, s: float) -> float:
        """d loss / d s; the derivative of |x| is taken as 0 at x = 0."""
        factor = math.exp(s)
        derivative = 0.0
        if self.heights is not None:
            h = factor * self.heights
            derivative += self.cam_weight * float(np.mean(np.sign(h - self.h_star) * h))
        if self.objects:
            per_object = [np.mean(np.sign(factor * d - target) * factor * d) for d, target in self.objects]
            derivative += self.aux_weight * float(np.mean(per_object))
        return derivative


def log_scale_terms(depth: DepthMap, inputs: ScaleLossInputs) -> LogScaleTerms:
    """Precompute the scale terms of one frame at s = 0."""
    heights = None
    if inputs.h_star is not None:
        _, height_map = _camera_terms(depth, inputs)
        usable = np.asarray(inputs.road_mask, dtype=bool) & np.isfinite(height_map)
        if not usable.any():
            raise UndefinedLossError("No valid road pixel for the camera-height loss")
        heights = height_map[usable]

    objects = []
    for instance in inputs.instances:
        prior = inputs.priors.get(instance.id)
        if prior is None:
            continue
        usable = instance.mask & depth.valid
        if not usable.any():
            continue
        objects.append((depth.values[usable], approx_object_depth(prior, instance.bbox.height_px, inputs.intr.fy)))

    if heights is None and not objects:
        raise UndefinedLossError("Neither the camera-height nor the auxiliary term is defined")
    return LogScaleTerms(
        heights=heights,
        h_star=inputs.h_star,
        objects=objects,
        cam_weight=inputs.weights.alpha * inputs.lambda_cam,
        aux_weight=inputs.weights.beta * inputs.lambda_aux,
    )


def loss_gradient(depth: DepthMap, inputs: ScaleLossInputs, mode="per-pixel"):
    """Gradient of the scale terms: an (H, W) array per pixel, or a float for the global log-scale."""
    try:
        mode = GradientMode(mode)
    except ValueError:
        raise InvalidInputError(f"Unknown gradient mode '{mode}'")
    if mode is GradientMode.PER_PIXEL:
        return _per_pixel(depth, inputs)
    return log_scale_terms(depth, inputs).derivative(0.0)
