"""
Photometric, smoothness and scale losses evaluated on a depth map, with the
epoch weight schedule and the weighted total.
"""

import logging
import math
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from src.errors import ConfigError, InvalidInputError, NumericalError, UndefinedLossError
from src.models.camera import DepthMap, Image, Intrinsics, RelativePose
from src.models.losses import LossBreakdown, LossOptions, LossWeights
from src.models.scene import ObjectInstance
from src.services.geometry import backproject_depth

logger = logging.getLogger(__name__)

SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2


def _check_same_shape(a: Image, b: Image):
    if a.values.shape != b.values.shape:
        raise InvalidInputError(f"Image dimensions differ: {a.values.shape} vs {b.values.shape}")


def _window_mean(values: np.ndarray) -> np.ndarray:
    # 3x3 box over rows and columns only; "mirror" is reflect padding without edge repeat.
    return ndimage.uniform_filter(values, size=(3, 3, 1), mode="mirror")


def ssim(a: Image, b: Image) -> np.ndarray:
    """Windowed SSIM, averaged over channels, shape (H, W)."""
    _check_same_shape(a, b)
    x, y = a.values, b.values

    mu_x = _window_mean(x)
    mu_y = _window_mean(y)
    sigma_x = _window_mean(x * x) - mu_x**2
    sigma_y = _window_mean(y * y) - mu_y**2
    sigma_xy = _window_mean(x * y) - mu_x * mu_y

    numerator = (2 * mu_x * mu_y + SSIM_C1) * (2 * sigma_xy + SSIM_C2)
    denominator = (mu_x**2 + mu_y**2 + SSIM_C1) * (sigma_x + sigma_y + SSIM_C2)
    return np.clip(numerator / denominator, -1.0, 1.0).mean(axis=2)


def photometric_error(a: Image, b: Image, lambda_pe: float = 0.85) -> np.ndarray:
    """(lambda/2)(1 - SSIM) + (1 - lambda)|a - b| per pixel."""
    _check_same_shape(a, b)
    l1 = np.abs(a.values - b.values).mean(axis=2)
    pe = lambda_pe / 2.0 * (1.0 - ssim(a, b)) + (1.0 - lambda_pe) * l1
    return np.maximum(pe, 0.0)


def reprojection_coordinates(
    depth: DepthMap, pose: RelativePose, intr: Intrinsics
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Source-view pixel coordinates (u, v) of every target pixel and its in-frustum mask."""
    points = pose.apply(backproject_depth(depth, intr))
    z = points[..., 2]
    with np.errstate(invalid="ignore", divide="ignore"):
        in_front = np.isfinite(z) & (z > 0)
        safe_z = np.where(in_front, z, 1.0)
        u = intr.fx * points[..., 0] / safe_z + intr.cx
        v = intr.fy * points[..., 1] / safe_z + intr.cy
        height, width = depth.shape
        valid = in_front & depth.valid & (u >= 0) & (u <= width - 1) & (v >= 0) & (v <= height - 1)
    return u, v, valid


def warp_view(
    source: Image, depth: DepthMap, pose: RelativePose, intr: Intrinsics
) -> Tuple[Image, np.ndarray]:
    """Synthesize the target view from a source image by bilinear sampling."""
    if source.shape != depth.shape:
        raise InvalidInputError(f"Source image {source.shape} does not match depth {depth.shape}")

    u, v, valid = reprojection_coordinates(depth, pose, intr)
    coords = np.stack([np.where(valid, v, 0.0), np.where(valid, u, 0.0)])
    warped = np.zeros_like(source.values)
    for c in range(source.channels):
        warped[..., c] = ndimage.map_coordinates(source.values[..., c], coords, order=1, mode="nearest")
    warped[~valid] = 0.0
    return Image(np.clip(warped, 0.0, 1.0)), valid


def reconstruction_loss(
    target: Image,
    sources: Sequence[Image],
    warps: Sequence[Image],
    automask: bool = True,
    lambda_pe: float = 0.85,
    valid_masks: Optional[Sequence[np.ndarray]] = None,
) -> float:
    """Mean over kept pixels of the per-pixel minimum photometric error across sources."""
    if not warps:
        raise InvalidInputError("Reconstruction loss needs at least one source")
    if len(sources) != len(warps):
        raise InvalidInputError(f"Got {len(sources)} sources but {len(warps)} warped views")
    if valid_masks is not None and len(valid_masks) != len(warps):
        raise InvalidInputError("Need one validity mask per warped view")

    errors = []
    for index, warped in enumerate(warps):
        pe = photometric_error(target, warped, lambda_pe)
        if valid_masks is not None:
            pe = np.where(np.asarray(valid_masks[index], dtype=bool), pe, np.inf)
        errors.append(pe)
    best = np.min(errors, axis=0)
    keep = np.isfinite(best)

    if automask:
        identity = np.min([photometric_error(target, source, lambda_pe) for source in sources], axis=0)
        keep &= best < identity

    if not keep.any():
        raise UndefinedLossError("No pixel left for the reconstruction loss")
    return float(best[keep].mean())


def smoothness_loss(disparity: np.ndarray, image: Image) -> float:
    """Edge-aware smoothness of mean-normalized disparity, forward differences."""
    disparity = np.asarray(disparity, dtype=np.float64)
    if disparity.shape != image.shape:
        raise InvalidInputError(f"Disparity {disparity.shape} does not match image {image.shape}")
    mean = float(disparity.mean())
    if not (math.isfinite(mean) and mean > 0):
        raise InvalidInputError(f"Disparity mean must be positive, got {mean}")

    normalized = disparity / mean
    grad_d_x = np.abs(np.diff(normalized, axis=1))
    grad_d_y = np.abs(np.diff(normalized, axis=0))
    grad_i_x = np.abs(np.diff(image.values, axis=1)).mean(axis=2)
    grad_i_y = np.abs(np.diff(image.values, axis=0)).mean(axis=2)

    terms = []
    if grad_d_x.size:
        terms.append((grad_d_x * np.exp(-grad_i_x)).mean())
    if grad_d_y.size:
        terms.append((grad_d_y * np.exp(-grad_i_y)).mean())
    return float(sum(terms))


def camera_height_loss(height_map: np.ndarray, road_mask: np.ndarray, h_star: float) -> float:
    """Mean |H(p) - H*| over road pixels with a valid height."""
    if not (h_star > 0 and math.isfinite(h_star)):
        raise InvalidInputError(f"Supervision height must be positive, got {h_star}")
    road_mask = np.asarray(road_mask, dtype=bool)
    if road_mask.shape != height_map.shape:
        raise InvalidInputError("Road mask does not match the height map")

    usable = road_mask & np.isfinite(height_map)
    if not usable.any():
        raise UndefinedLossError("No valid road pixel for the camera-height loss")
    return float(np.abs(height_map[usable] - h_star).mean())


def approx_object_depth(prior_height: float, height_px: int, fy: float) -> float:
    """Pinhole depth at which an object of `prior_height` spans `height_px` rows."""
    return prior_height / height_px * fy


def aux_geometric_loss(
    depth: DepthMap,
    instances: Sequence[ObjectInstance],
    priors: dict,
    intr: Intrinsics,
) -> Optional[float]:
    """Mean over inlier objects of mean |D - D_aprx| inside each mask; None when no object counts."""
    per_object = []
    for instance in instances:
        prior = priors.get(instance.id)
        if prior is None:
            continue
        usable = instance.mask & depth.valid
        if not usable.any():
            continue
        target = approx_object_depth(prior, instance.bbox.height_px, intr.fy)
        per_object.append(float(np.abs(depth.values[usable] - target).mean()))

    if not per_object:
        return None
    return float(np.mean(per_object))


def loss_weight_schedule(
    tau: int,
    tau_mid: int,
    epsilon: float = 0.005,
    literal_aux_sign: bool = False,
    fix_camera_weight: bool = False,
    balance_weights: bool = True,
) -> Tuple[float, float]:
    """(lambda_aux, lambda_cam) for the zero-based training epoch tau."""
    if int(tau_mid) != tau_mid or tau_mid < 1:
        raise ConfigError(f"tau_mid must be an integer >= 1, got {tau_mid}")
    if tau < 0:
        raise InvalidInputError(f"Epoch must be nonnegative, got {tau}")
    if not balance_weights:
        return 1.0, 1.0

    if tau > tau_mid:
        lambda_cam, lambda_aux = 1.0, epsilon
    else:
        ratio = math.log(tau + 1) / math.log(tau_mid + 1)
        lambda_cam = ratio
        lambda_aux = -ratio if literal_aux_sign else max(1.0 - ratio, epsilon)
    if fix_camera_weight:
        lambda_cam = 1.0
    return lambda_aux, lambda_cam


def total_loss(
    rec: Optional[float] = None,
    sm: Optional[float] = None,
    cam: Optional[float] = None,
    aux: Optional[float] = None,
    weights: LossWeights = LossWeights(),
    tau: int = 0,
    options: LossOptions = LossOptions(),
    fix_camera_weight: bool = False,
) -> LossBreakdown:
    """Weighted sum; absent (None) or switched-off terms contribute 0."""
    for name, value in (("L_rec", rec), ("L_sm", sm), ("L_cam", cam), ("L_aux", aux)):
        if value is not None and not math.isfinite(value):
            raise NumericalError(f"{name} is not finite ({value})")

    if not options.use_camera_loss:
        cam = None
    if not options.use_aux_loss:
        aux = None

    lambda_aux, lambda_cam = loss_weight_schedule(
        tau,
        weights.tau_mid,
        weights.epsilon,
        literal_aux_sign=options.literal_aux_sign,
        fix_camera_weight=fix_camera_weight,
        balance_weights=options.balance_weights,
    )

    def value(term):
        return 0.0 if term is None else term

    total = (
        weights.alpha * lambda_cam * value(cam)
        + weights.beta * lambda_aux * value(aux)
        + value(sm)
        + value(rec)
    )
    return LossBreakdown(
        rec=value(rec),
        sm=value(sm),
        cam=value(cam),
        aux=value(aux),
        lambda_aux=lambda_aux,
        lambda_cam=lambda_cam,
        total=total,
        rec_present=rec is not None,
        sm_present=sm is not None,
        cam_present=cam is not None,
        aux_present=aux is not None,
    )
