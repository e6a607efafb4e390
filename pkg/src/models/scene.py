"""
Scene-side domain types: road masks, object instances and the per-frame
measurements derived from them.
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from src.errors import InvalidInputError


@dataclass(frozen=True)
class BoundingBox:
    """Tight pixel bounds, inclusive on both ends."""

    u_min: int
    v_min: int
    u_max: int
    v_max: int

    @property
    def height_px(self) -> int:
        """Number of pixel rows covered."""
        return self.v_max - self.v_min + 1

    @classmethod
    def from_mask(cls, mask: np.ndarray) -> "BoundingBox":
        rows = np.flatnonzero(mask.any(axis=1))
        cols = np.flatnonzero(mask.any(axis=0))
        if rows.size == 0:
            raise InvalidInputError("Cannot bound an empty mask")
        return cls(int(cols[0]), int(rows[0]), int(cols[-1]), int(rows[-1]))


@dataclass(frozen=True, eq=False)
class ObjectInstance:
    """One segmented object: id, class label, mask and its tight bounding box."""

    id: int
    label: str
    mask: np.ndarray
    bbox: Optional[BoundingBox] = None

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        if mask.ndim != 2 or not mask.any():
            raise InvalidInputError(f"Instance {self.id} has an empty mask")
        tight = BoundingBox.from_mask(mask)
        if self.bbox is not None and self.bbox != tight:
            raise InvalidInputError(f"Instance {self.id} bounding box {self.bbox} is not tight ({tight})")
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "bbox", tight)

    @classmethod
    def from_label_image(cls, labels: np.ndarray, label: str = "car") -> List["ObjectInstance"]:
        """Split an instance-id image (0 = background) into instances, ordered by id."""
        ids = [int(i) for i in np.unique(labels) if i != 0]
        return [cls(id=i, label=label, mask=labels == i) for i in ids]


@dataclass(frozen=True, eq=False)
class FrameAnnotation:
    """Road mask plus object instances for one frame."""

    road_mask: np.ndarray
    instances: List[ObjectInstance] = field(default_factory=list)

    def __post_init__(self):
        road = np.asarray(self.road_mask, dtype=bool)
        if road.ndim != 2:
            raise InvalidInputError("Road mask must be 2D")
        for instance in self.instances:
            if instance.mask.shape != road.shape:
                raise InvalidInputError(f"Instance {instance.id} mask does not match the road mask dimensions")
        object.__setattr__(self, "road_mask", road)


@dataclass(frozen=True)
class FrameCameraHeight:
    """Camera height of one frame; `scaled` is False while still in depth units."""

    value: float
    scaled: bool = False


@dataclass(frozen=True)
class SilhouetteMeasurement:
    """Unscaled silhouette height of one object."""

    object_id: int
    height: float
    valid: bool = True


@dataclass(frozen=True)
class FrameScale:
    """Per-frame scale factor s = prior / silhouette, with its inlier count."""

    s: float
    count: int

    def __post_init__(self):
        if not self.s > 0 or self.count < 1:
            raise InvalidInputError(f"Invalid frame scale s={self.s}, count={self.count}")


@dataclass(frozen=True)
class HorizonLine:
    """Image line a*u + b*v + c = 0."""

    a: float
    b: float
    c: float

    def __post_init__(self):
        if self.a == 0 and self.b == 0:
            raise InvalidInputError("Horizon line needs (a, b) not both zero")

    def distance(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Unsigned Euclidean pixel distance of (u, v) to the line."""
        return np.abs(self.a * u + self.b * v + self.c) / np.hypot(self.a, self.b)
