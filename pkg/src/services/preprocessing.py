"""
Sequence preparation: static-frame elimination and focal-length alignment.
"""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from src.errors import InvalidInputError
from src.models.camera import Image, Intrinsics

logger = logging.getLogger(__name__)

# Calibrated on simulator static/moving pairs.
DEFAULT_PIXEL_THRESHOLD = 0.03
DEFAULT_COUNT_FRACTION = 0.05

_ORDERS = {"image": 1, "mask": 0, "depth": 0}


def changed_pixels(a: Image, b: Image, pixel_threshold: float = DEFAULT_PIXEL_THRESHOLD) -> int:
    if a.values.shape != b.values.shape:
        raise InvalidInputError(f"Frame dimensions differ: {a.values.shape} vs {b.values.shape}")
    difference = np.abs(a.values - b.values).mean(axis=2)
    return int(np.count_nonzero(difference > pixel_threshold))


def static_frame_filter(
    a: Image,
    b: Image,
    pixel_threshold: float = DEFAULT_PIXEL_THRESHOLD,
    count_fraction: float = DEFAULT_COUNT_FRACTION,
) -> bool:
    """True to keep frame b: enough pixels changed since frame a."""
    count = changed_pixels(a, b, pixel_threshold)
    return count >= count_fraction * a.height * a.width


def filter_static_frames(
    images: Sequence[Image],
    stride: int = 1,
    pixel_threshold: float = DEFAULT_PIXEL_THRESHOLD,
    count_fraction: float = DEFAULT_COUNT_FRACTION,
) -> List[int]:
    """Indices of frames kept: every `stride`-th frame that moved relative to the last kept one."""
    if stride < 1:
        raise InvalidInputError(f"Stride must be >= 1, got {stride}")
    if not images:
        return []

    kept = [0]
    for index in range(stride, len(images), stride):
        if static_frame_filter(images[kept[-1]], images[index], pixel_threshold, count_fraction):
            kept.append(index)
        else:
            logger.debug("Frame %d dropped as static", index)
    logger.info("Kept %d of %d frames", len(kept), len(images))
    return kept


def _resample(values: np.ndarray, shape: Tuple[int, int], factor: float, order: int) -> np.ndarray:
    new_height, new_width = shape
    # Pixel-center mapping from output to input coordinates at one isotropic factor.
    rows = (np.arange(new_height) + 0.5) / factor - 0.5
    cols = (np.arange(new_width) + 0.5) / factor - 0.5
    grid = np.stack(np.meshgrid(rows, cols, indexing="ij"))

    if values.ndim == 2:
        return ndimage.map_coordinates(values, grid, order=order, mode="nearest")
    channels = [
        ndimage.map_coordinates(values[..., c], grid, order=order, mode="nearest") for c in range(values.shape[2])
    ]
    return np.stack(channels, axis=-1)


def align_focal_length(
    values: np.ndarray,
    intr: Intrinsics,
    target_focal: float,
    kind: str = "image",
    crop_size: Optional[Tuple[int, int]] = None,
) -> Tuple[np.ndarray, Intrinsics]:
    """Resize so fx becomes `target_focal`, then center-crop to `crop_size` (width, height).

    Both axes use the exact factor target_focal / fx; the output size is
    rounded, so the last row or column may sample up to half a pixel past the
    border. Images are resampled bilinearly; masks and depth by nearest
    neighbor so labels and distances are carried over unchanged.
    """
    if not target_focal > 0:
        raise InvalidInputError(f"Target focal length must be positive, got {target_focal}")
    if kind not in _ORDERS:
        raise InvalidInputError(f"Unknown data kind '{kind}' (expected image, mask or depth)")

    values = np.asarray(values)
    height, width = values.shape[:2]
    scale = target_focal / intr.fx
    new_height, new_width = max(1, int(round(height * scale))), max(1, int(round(width * scale)))

    if scale == 1.0:
        resized, aligned = values.copy(), intr
    else:
        resized = _resample(values, (new_height, new_width), scale, _ORDERS[kind])
        if kind == "mask":
            resized = resized.astype(values.dtype)
        aligned = intr.scaled(scale, scale)

    if crop_size is None:
        return resized, aligned
    crop_width, crop_height = crop_size
    if crop_width > new_width or crop_height > new_height:
        raise InvalidInputError(f"Crop {crop_width}x{crop_height} exceeds the resized image {new_width}x{new_height}")
    x0 = (new_width - crop_width) // 2
    y0 = (new_height - crop_height) // 2
    return resized[y0 : y0 + crop_height, x0 : x0 + crop_width], aligned.cropped(x0, y0)
