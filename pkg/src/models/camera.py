"""
Camera-side domain types: intrinsics, depth maps, normals, images and poses.
"""

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Tuple

import numpy as np

from src.errors import InvalidInputError


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole intrinsics in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise InvalidInputError(f"Focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if not (math.isfinite(self.fx) and math.isfinite(self.fy)):
            raise InvalidInputError("Focal lengths must be finite")
        if not (math.isfinite(self.cx) and math.isfinite(self.cy)):
            raise InvalidInputError(f"Principal point must be finite, got ({self.cx}, {self.cy})")

    @property
    def matrix(self) -> np.ndarray:
        """The 3x3 calibration matrix K."""
        return np.array(
            [
                [self.fx, 0.0, self.cx],
                [0.0, self.fy, self.cy],
                [0.0, 0.0, 1.0],
            ]
        )

    def scaled(self, sx: float, sy: float) -> "Intrinsics":
        """Intrinsics after resizing the image by (sx, sy), pixel-center convention."""
        return Intrinsics(
            fx=self.fx * sx,
            fy=self.fy * sy,
            cx=(self.cx + 0.5) * sx - 0.5,
            cy=(self.cy + 0.5) * sy - 0.5,
        )

    def cropped(self, x0: int, y0: int) -> "Intrinsics":
        """Intrinsics after cropping with the top-left corner at (x0, y0)."""
        return Intrinsics(fx=self.fx, fy=self.fy, cx=self.cx - x0, cy=self.cy - y0)

    def to_dict(self):
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy}


class Point3(NamedTuple):
    """A point in the camera frame (x right, y down, z forward), meters."""

    x: float
    y: float
    z: float


@dataclass(frozen=True, eq=False)
class DepthMap:
    """Dense per-pixel depth in meters; nonpositive or NaN values are invalid."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.size == 0:
            raise InvalidInputError(f"Depth map must be a non-empty 2D array, got shape {values.shape}")
        if np.isinf(values).any():
            raise InvalidInputError("Depth map contains infinite values")
        object.__setattr__(self, "values", values)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape

    @property
    def valid(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return np.isfinite(self.values) & (self.values > 0)

    def scaled(self, k: float) -> "DepthMap":
        return DepthMap(self.values * k)


@dataclass(frozen=True, eq=False)
class NormalMap:
    """Per-pixel unit normals (H x W x 3) with a validity mask."""

    vectors: np.ndarray
    valid: np.ndarray

    @property
    def shape(self) -> Tuple[int, int]:
        return self.valid.shape


@dataclass(frozen=True, eq=False)
class Image:
    """Intensities in [0, 1], stored as H x W x C with C in {1, 3}."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == 2:
            values = values[:, :, None]
        if values.ndim != 3 or values.shape[2] not in (1, 3) or values.shape[0] == 0 or values.shape[1] == 0:
            raise InvalidInputError(f"Image must be H x W x 1 or H x W x 3, got shape {values.shape}")
        if not np.isfinite(values).all():
            raise InvalidInputError("Image contains non-finite intensities")
        if values.min() < 0.0 or values.max() > 1.0:
            raise InvalidInputError("Image intensities must lie in [0, 1]")
        object.__setattr__(self, "values", values)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return self.values.shape[2]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape[:2]


@dataclass(frozen=True, eq=False)
class RelativePose:
    """Rigid transform T_{t->s}: x_s = R x_t + t."""

    rotation: np.ndarray
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        rotation = np.asarray(self.rotation, dtype=np.float64)
        translation = np.asarray(self.translation, dtype=np.float64).reshape(-1)
        if rotation.shape != (3, 3) or translation.shape != (3,):
            raise InvalidInputError("Pose needs a 3x3 rotation and a 3-vector translation")
        if not (np.isfinite(rotation).all() and np.isfinite(translation).all()):
            raise InvalidInputError("Pose contains non-finite values")
        if not np.allclose(rotation.T @ rotation, np.eye(3), rtol=0.0, atol=1e-9):
            raise InvalidInputError("Pose rotation is not orthonormal")
        if np.linalg.det(rotation) < 0:
            raise InvalidInputError("Pose rotation has determinant -1")
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "translation", translation)

    @classmethod
    def identity(cls) -> "RelativePose":
        return cls(np.eye(3), np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform an (..., 3) array of points."""
        return points @ self.rotation.T + self.translation

    def to_list(self):
        """Row-major 3x4 [R | t] as 12 floats."""
        return np.hstack([self.rotation, self.translation[:, None]]).reshape(-1).tolist()

    @classmethod
    def from_list(cls, values) -> "RelativePose":
        matrix = np.asarray(values, dtype=np.float64)
        if matrix.size != 12:
            raise InvalidInputError(f"Pose needs 12 values (3x4 row-major), got {matrix.size}")
        matrix = matrix.reshape(3, 4)
        return cls(matrix[:, :3], matrix[:, 3])
