"""
Synthetic road scenes: a flat road at a known camera height with boxes of
known size, ray cast into depth, road and instance masks and textured views.

World frame: origin at the (target) camera center, x right, y down, z
forward and level with the road, which lies at y = camera_height. The camera
is pitched about its x axis; positive pitch looks down.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, NamedTuple, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from src.errors import ConfigError, InvalidInputError
from src.models.camera import DepthMap, Image, Intrinsics, RelativePose
from src.models.scene import ObjectInstance
from src.services.geometry import pixel_rays

logger = logging.getLogger(__name__)

SKY_INTENSITY = 0.8

# Texture octaves: lateral period (m), longitudinal period (m), amplitude.
TEXTURE_OCTAVES = ((1.0, 2.0, 0.12), (4.0, 8.0, 0.08))
# Detail is kept only where a period spans enough pixels for a camera of this
# focal length (px) at least this high above the road (m).
TEXTURE_FOCAL = 500.0
TEXTURE_MIN_HEIGHT = 1.0
TEXTURE_FADE_PX = (16.0, 32.0)
# Far-field brightness approaches the sky so the horizon carries no edge.
TEXTURE_BASE_RANGE = 40.0
ROAD_LABEL = -1
SKY_LABEL = 0

# Lateral lanes of randomly placed boxes, meters.
LANES = (-5.0, 0.0, 5.0)


@dataclass(frozen=True)
class BoxSpec:
    """An upright box resting on the road; (x, z) is the footprint center, yaw about the vertical."""

    height: float
    width: float
    length: float
    x: float
    z: float
    yaw_deg: float = 0.0

    def __post_init__(self):
        if not (self.height > 0 and self.width > 0 and self.length > 0):
            raise ConfigError(f"Box dimensions must be positive, got {self.height}x{self.width}x{self.length}")

    def to_dict(self):
        return {
            "height": self.height,
            "width": self.width,
            "length": self.length,
            "x": self.x,
            "z": self.z,
            "yaw_deg": self.yaw_deg,
        }


@dataclass(frozen=True)
class SceneConfig:
    intrinsics: Intrinsics
    width: int
    height: int
    camera_height: float
    pitch_deg: float = 0.0
    boxes: Tuple[BoxSpec, ...] = field(default_factory=tuple)
    noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.camera_height > 0:
            raise ConfigError(f"Camera must be above the road, got height {self.camera_height}")
        if self.width < 3 or self.height < 3:
            raise ConfigError(f"Image must be at least 3x3, got {self.width}x{self.height}")
        if not -80.0 < self.pitch_deg < 80.0:
            raise ConfigError(f"Pitch must lie in (-80, 80) degrees, got {self.pitch_deg}")
        if self.noise < 0:
            raise ConfigError("Depth noise must be nonnegative")
        object.__setattr__(self, "boxes", tuple(self.boxes))

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.height, self.width)

    @property
    def camera_to_world(self) -> np.ndarray:
        return Rotation.from_euler("x", -self.pitch_deg, degrees=True).as_matrix()

    @property
    def road_normal(self) -> np.ndarray:
        """Road normal in the camera frame, pointing up (toward the camera)."""
        return self.camera_to_world.T @ np.array([0.0, -1.0, 0.0])


@dataclass(frozen=True, eq=False)
class GroundTruthRecord:
    camera_height: float
    road_normal: np.ndarray
    silhouette_heights: Dict[int, float]
    depth: DepthMap
    labels: np.ndarray


class RenderedScene(NamedTuple):
    depth: DepthMap
    road_mask: np.ndarray
    instances: List[ObjectInstance]
    truth: GroundTruthRecord


def _cast(config: SceneConfig, camera_to_world: np.ndarray, origin: np.ndarray):
    """Nearest hit of every pixel ray: z-depth, hit label and world hit point."""
    rays = pixel_rays(config.intrinsics, config.shape)
    directions = rays @ camera_to_world.T

    t_best = np.full(config.shape, np.inf)
    labels = np.full(config.shape, SKY_LABEL, dtype=np.int32)

    dy = directions[..., 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        t_ground = np.where(dy > 0, (config.camera_height - origin[1]) / dy, np.inf)
    hit = (t_ground > 0) & (t_ground < t_best)
    t_best[hit] = t_ground[hit]
    labels[hit] = ROAD_LABEL

    for index, box in enumerate(config.boxes):
        to_box = Rotation.from_euler("y", box.yaw_deg, degrees=True).as_matrix().T
        center = np.array([box.x, config.camera_height - box.height / 2.0, box.z])
        local_origin = to_box @ (origin - center)
        local_dir = directions @ to_box.T
        local_dir = np.where(np.abs(local_dir) < 1e-12, 1e-12, local_dir)
        half = np.array([box.width, box.height, box.length]) / 2.0

        # Slab test
        t1 = (-half - local_origin) / local_dir
        t2 = (half - local_origin) / local_dir
        t_near = np.max(np.minimum(t1, t2), axis=-1)
        t_far = np.min(np.maximum(t1, t2), axis=-1)
        hit = (t_near <= t_far) & (t_near > 0) & (t_near < t_best)
        t_best[hit] = t_near[hit]
        labels[hit] = index + 1

    points = origin + directions * np.where(np.isfinite(t_best), t_best, np.nan)[..., None]
    return t_best, labels, points


def render_scene(config: SceneConfig) -> RenderedScene:
    """Depth, road mask, instances and ground truth of the target view."""
    t_best, labels, _ = _cast(config, config.camera_to_world, np.zeros(3))
    truth_values = np.where(np.isfinite(t_best), t_best, np.nan)
    truth_depth = DepthMap(truth_values)

    values = truth_values
    if config.noise > 0:
        rng = np.random.default_rng(config.seed)
        values = truth_values * rng.lognormal(mean=0.0, sigma=config.noise, size=truth_values.shape)

    road_mask = labels == ROAD_LABEL
    instance_labels = np.where(labels > 0, labels, 0)
    instances = ObjectInstance.from_label_image(instance_labels)
    visible = {instance.id for instance in instances}
    truth = GroundTruthRecord(
        camera_height=config.camera_height,
        road_normal=config.road_normal,
        silhouette_heights={i + 1: box.height for i, box in enumerate(config.boxes) if i + 1 in visible},
        depth=truth_depth,
        labels=instance_labels,
    )
    logger.debug("Rendered %dx%d scene with %d visible boxes", config.width, config.height, len(instances))
    return RenderedScene(DepthMap(values), road_mask, instances, truth)


def apply_global_scale(depth: DepthMap, k: float) -> DepthMap:
    """Multiply every depth by k."""
    if not (k > 0 and math.isfinite(k)):
        raise InvalidInputError(f"Scale must be positive, got {k}")
    return depth.scaled(k)


def _smoothstep(x: np.ndarray) -> np.ndarray:
    x = np.clip(x, 0.0, 1.0)
    return x * x * (3.0 - 2.0 * x)


def texture_intensity(points: np.ndarray) -> np.ndarray:
    """Band-limited pattern on world points.

    Each octave fades out once its projected period, across or along the road,
    drops below `TEXTURE_FADE_PX` pixels, so bilinear resampling of a rendered
    view reproduces the texture at any distance.
    """
    x, y, z = points[..., 0], points[..., 1], points[..., 2]
    z = np.maximum(z, 1e-3)
    low, high = TEXTURE_FADE_PX

    intensity = SKY_INTENSITY - (SKY_INTENSITY - 0.5) * np.exp(-z / TEXTURE_BASE_RANGE)
    for lateral, longitudinal, amplitude in TEXTURE_OCTAVES:
        period_px = np.minimum(
            lateral * TEXTURE_FOCAL / z, longitudinal * TEXTURE_FOCAL * TEXTURE_MIN_HEIGHT / (z * z)
        )
        fade = _smoothstep((period_px - low) / (high - low))
        pattern = np.sin(2.0 * np.pi * (x + y) / lateral) * np.cos(2.0 * np.pi * z / longitudinal)
        intensity = intensity + amplitude * fade * pattern
    return intensity


def _render_image(config: SceneConfig, camera_to_world: np.ndarray, origin: np.ndarray) -> Image:
    t_best, _, points = _cast(config, camera_to_world, origin)
    intensity = np.full(config.shape, SKY_INTENSITY)
    hit = np.isfinite(t_best)
    intensity[hit] = texture_intensity(points[hit])
    return Image(np.clip(intensity, 0.0, 1.0))


def render_view_pair(config: SceneConfig, pose: RelativePose) -> Tuple[Image, Image, DepthMap, RelativePose]:
    """Target and source renders of the same scene, with pose T_{t->s} (x_s = R x_t + t)."""
    target_to_world = config.camera_to_world
    source_to_world = target_to_world @ pose.rotation.T
    source_origin = target_to_world @ (-pose.rotation.T @ pose.translation)
    if not source_origin[1] < config.camera_height:
        raise InvalidInputError("Pose puts the source camera on or below the road")

    target = _render_image(config, target_to_world, np.zeros(3))
    source = _render_image(config, source_to_world, source_origin)
    depth = render_scene(config).truth.depth
    return target, source, depth, pose


def random_boxes(
    rng: np.random.Generator,
    camera_height: float,
    count: int = 3,
    tall: bool = False,
    max_yaw_deg: float = 10.0,
) -> Tuple[BoxSpec, ...]:
    """Car-sized boxes in distinct lanes, the center lane farthest so nothing is hidden.

    `tall` makes every box at least nearly as tall as the camera, so the box
    top is not seen from above.
    """
    if not 1 <= count <= len(LANES):
        raise InvalidInputError(f"Between 1 and {len(LANES)} boxes fit the lanes, got {count}")
    lanes = sorted(rng.choice(len(LANES), size=count, replace=False), key=lambda i: abs(LANES[i]), reverse=True)
    depths = np.sort(rng.uniform(14.0, 30.0, size=count))

    boxes = []
    for lane, z in zip(lanes, depths):
        if tall:
            height = rng.uniform(camera_height - 0.1, camera_height + 0.4)
        else:
            height = rng.uniform(1.4, 1.9)
        boxes.append(
            BoxSpec(
                height=float(height),
                width=float(rng.uniform(1.7, 2.0)),
                length=float(rng.uniform(4.0, 4.8)),
                x=LANES[lane],
                z=float(z),
                yaw_deg=float(rng.uniform(-max_yaw_deg, max_yaw_deg)),
            )
        )
    return tuple(boxes)


def default_intrinsics(width: int = 640, height: int = 320, focal: float = 500.0) -> Intrinsics:
    return Intrinsics(fx=focal, fy=focal, cx=width / 2.0, cy=height / 2.0)


def random_scene(
    rng: np.random.Generator,
    width: int = 640,
    height: int = 320,
    boxes: int = 3,
    tall: bool = False,
    noise: float = 0.0,
) -> SceneConfig:
    """Camera height in [1.2, 2.0] m, pitch in [-5, 5] degrees, boxes from `random_boxes`."""
    camera_height = float(rng.uniform(1.2, 2.0))
    return SceneConfig(
        intrinsics=default_intrinsics(width, height),
        width=width,
        height=height,
        camera_height=camera_height,
        pitch_deg=float(rng.uniform(-5.0, 5.0)),
        boxes=random_boxes(rng, camera_height, count=boxes, tall=tall),
        noise=noise,
        seed=int(rng.integers(0, 2**31 - 1)),
    )


def generate_sequence(
    base: SceneConfig, frames: int, seed: int = 0, boxes: int = 3, tall: bool = False
) -> List[SceneConfig]:
    """Frames sharing the camera of `base`, each with freshly placed boxes and its own noise seed."""
    if frames < 1:
        raise InvalidInputError(f"Need at least one frame, got {frames}")
    rng = np.random.default_rng(seed)
    sequence = []
    for _ in range(frames):
        sequence.append(
            SceneConfig(
                intrinsics=base.intrinsics,
                width=base.width,
                height=base.height,
                camera_height=base.camera_height,
                pitch_deg=base.pitch_deg,
                boxes=base.boxes if base.boxes else random_boxes(rng, base.camera_height, count=boxes, tall=tall),
                noise=base.noise,
                seed=int(rng.integers(0, 2**31 - 1)),
            )
        )
    return sequence


def scene_from_mapping(data: Dict[str, Any]) -> SceneConfig:
    """Build a scene from a parsed `[scene]` table."""
    try:
        width = int(data.get("width", 640))
        height = int(data.get("height", 320))
        focal = float(data.get("focal", 500.0))
        intr = Intrinsics(
            fx=float(data.get("fx", focal)),
            fy=float(data.get("fy", focal)),
            cx=float(data.get("cx", width / 2.0)),
            cy=float(data.get("cy", height / 2.0)),
        )
        boxes = tuple(BoxSpec(**{k: float(v) for k, v in box.items()}) for box in data.get("boxes", []))
        return SceneConfig(
            intrinsics=intr,
            width=width,
            height=height,
            camera_height=float(data.get("camera_height", 1.65)),
            pitch_deg=float(data.get("pitch_deg", 0.0)),
            boxes=boxes,
            noise=float(data.get("noise", 0.0)),
            seed=int(data.get("seed", 0)),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid [scene] table: {e}")


def scene_to_mapping(config: SceneConfig) -> Dict[str, Any]:
    return {
        "width": config.width,
        "height": config.height,
        "fx": config.intrinsics.fx,
        "fy": config.intrinsics.fy,
        "cx": config.intrinsics.cx,
        "cy": config.intrinsics.cy,
        "camera_height": config.camera_height,
        "pitch_deg": config.pitch_deg,
        "noise": config.noise,
        "seed": config.seed,
        "boxes": [box.to_dict() for box in config.boxes],
    }

