"""
8-bit PGM masks: 255 marks road pixels in a road mask, 1..254 are instance
ids in an instance mask, 0 is background.
"""

import numpy as np
from PIL import Image as PILImage
from PIL import UnidentifiedImageError

from src.errors import ParseError, ValidationError

ROAD_VALUE = 255
MAX_INSTANCE_ID = 254


def _read(path: str) -> np.ndarray:
    try:
        with PILImage.open(path) as image:
            if image.mode != "L":
                raise ParseError(f"expected an 8-bit grayscale image, got mode {image.mode}", path=path)
            return np.array(image, dtype=np.uint8)
    except FileNotFoundError:
        raise ParseError("file not found", path=path)
    except UnidentifiedImageError:
        raise ParseError("not a PGM image", path=path)


def _write(path: str, values: np.ndarray):
    PILImage.fromarray(np.ascontiguousarray(values, dtype=np.uint8)).save(path, format="PPM")


def read_road_mask(path: str) -> np.ndarray:
    return _read(path) == ROAD_VALUE


def write_road_mask(path: str, mask: np.ndarray):
    _write(path, np.where(np.asarray(mask, dtype=bool), ROAD_VALUE, 0))


def read_instance_mask(path: str) -> np.ndarray:
    """Instance-id image; 0 is background."""
    labels = _read(path)
    if (labels == ROAD_VALUE).any():
        raise ValidationError(f"{path}: value 255 is reserved for road masks")
    return labels.astype(np.int32)


def write_instance_mask(path: str, labels: np.ndarray):
    labels = np.asarray(labels)
    if labels.min() < 0 or labels.max() > MAX_INSTANCE_ID:
        raise ValidationError(f"Instance ids must lie in 1..{MAX_INSTANCE_ID}")
    _write(path, labels)
