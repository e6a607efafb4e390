"""
The seven standard monocular depth error metrics.
"""

from dataclasses import asdict, dataclass
from typing import Optional, Tuple

import numpy as np

from src.errors import InvalidInputError
from src.models.camera import DepthMap


@dataclass(frozen=True)
class MetricsReport:
    abs_rel: float
    sq_rel: float
    rmse: float
    rmse_log: float
    a1: float
    a2: float
    a3: float
    count: int

    def to_dict(self):
        return asdict(self)


def center_crop_mask(shape: Tuple[int, int], crop: Tuple[int, int]) -> np.ndarray:
    """Boolean mask of a centered (width, height) evaluation window."""
    height, width = shape
    crop_width, crop_height = crop
    if crop_width > width or crop_height > height:
        raise InvalidInputError(f"Evaluation crop {crop_width}x{crop_height} exceeds {width}x{height}")
    mask = np.zeros(shape, dtype=bool)
    y0, x0 = (height - crop_height) // 2, (width - crop_width) // 2
    mask[y0 : y0 + crop_height, x0 : x0 + crop_width] = True
    return mask


def compute_depth_metrics(
    pred: DepthMap,
    gt: DepthMap,
    valid_mask: Optional[np.ndarray] = None,
    depth_cap: float = 80.0,
    min_depth: float = 1e-3,
    median_scaling: bool = False,
) -> MetricsReport:
    """Errors of `pred` against `gt` over valid ground-truth pixels within (min_depth, depth_cap]."""
    if not depth_cap > 0:
        raise InvalidInputError(f"Depth cap must be positive, got {depth_cap}")
    if pred.shape != gt.shape:
        raise InvalidInputError(f"Prediction {pred.shape} and ground truth {gt.shape} differ in size")

    with np.errstate(invalid="ignore"):
        mask = gt.valid & pred.valid & (gt.values > min_depth) & (gt.values <= depth_cap)
    if valid_mask is not None:
        mask &= np.asarray(valid_mask, dtype=bool)
    if not mask.any():
        raise InvalidInputError("No valid pixel to evaluate")

    truth = gt.values[mask]
    estimate = pred.values[mask]
    if median_scaling:
        estimate = estimate * np.median(truth) / np.median(estimate)
    estimate = np.clip(estimate, min_depth, depth_cap)

    ratio = np.maximum(truth / estimate, estimate / truth)
    return MetricsReport(
        abs_rel=float(np.mean(np.abs(truth - estimate) / truth)),
        sq_rel=float(np.mean((truth - estimate) ** 2 / truth)),
        rmse=float(np.sqrt(np.mean((truth - estimate) ** 2))),
        rmse_log=float(np.sqrt(np.mean((np.log(truth) - np.log(estimate)) ** 2))),
        a1=float(np.mean(ratio < 1.25)),
        a2=float(np.mean(ratio < 1.25**2)),
        a3=float(np.mean(ratio < 1.25**3)),
        count=int(mask.sum()),
    )
