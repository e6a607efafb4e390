"""
Test configuration and fixtures for the camera-height toolkit.
"""

import csv

import numpy as np
import pytest
from scipy import ndimage

from src.config import PipelineConfig
from src.models.camera import DepthMap, Image, Intrinsics
from src.services.simulator import BoxSpec, SceneConfig, default_intrinsics, generate_sequence

# Import ledger fixtures to make them available
from tests.conftest_sqlalchemy import ledger, ledger_path  # noqa: F401

# Front face of a yaw-free box at this depth spans exactly 27 rows at f = 500
# with the camera 1.25 m over the road and the box 1.5 m tall.
EXACT_FRONT_DEPTH = 750.0 / 27.0
EXACT_BOX_LENGTH = 4.0


@pytest.fixture
def intrinsics():
    """640x320 camera with a 500 px focal length."""
    return default_intrinsics(640, 320, 500.0)


@pytest.fixture
def small_intrinsics():
    return Intrinsics(fx=100.0, fy=100.0, cx=20.0, cy=15.0)


@pytest.fixture
def flat_scene(intrinsics):
    """Empty road, camera 1.5 m high, looking 3 degrees down."""
    return SceneConfig(intrinsics=intrinsics, width=640, height=320, camera_height=1.5, pitch_deg=3.0)


@pytest.fixture
def box_scene(intrinsics):
    """Camera above three car-sized boxes, so every box top is visible."""
    boxes = (
        BoxSpec(height=1.5, width=1.8, length=4.4, x=-5.0, z=16.0, yaw_deg=5.0),
        BoxSpec(height=1.7, width=1.9, length=4.6, x=5.0, z=19.0, yaw_deg=-8.0),
        BoxSpec(height=1.6, width=1.8, length=4.2, x=0.0, z=25.0),
    )
    return SceneConfig(
        intrinsics=intrinsics, width=640, height=320, camera_height=1.95, pitch_deg=2.0, boxes=boxes
    )


@pytest.fixture
def exact_scene(intrinsics):
    """One box whose pixel height makes the pinhole depth approximation exact."""
    box = BoxSpec(height=1.5, width=2.0, length=EXACT_BOX_LENGTH, x=0.0, z=EXACT_FRONT_DEPTH + EXACT_BOX_LENGTH / 2)
    return SceneConfig(intrinsics=intrinsics, width=640, height=320, camera_height=1.25, boxes=(box,))


@pytest.fixture
def high_camera_sequence(intrinsics):
    """Six frames with random boxes under a 2 m camera."""
    base = SceneConfig(intrinsics=intrinsics, width=640, height=320, camera_height=2.0, pitch_deg=1.5)
    return generate_sequence(base, frames=6, seed=7)


@pytest.fixture
def testing_config():
    """Preset for tests: one thread, few epochs."""
    return PipelineConfig.from_preset("testing")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def textured_image(rng):
    """Smooth random texture in [0, 1]."""
    noise = ndimage.gaussian_filter(rng.random((48, 64)), sigma=2.0)
    noise = (noise - noise.min()) / (noise.max() - noise.min())
    return Image(0.2 + 0.6 * noise)


def plane_depth(intr: Intrinsics, shape, normal, height) -> DepthMap:
    """Depth of the plane n.X + height = 0 seen through every pixel."""
    rows, cols = shape
    v, u = np.mgrid[0:rows, 0:cols].astype(np.float64)
    rays = np.stack([(u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, np.ones_like(u)], axis=-1)
    denominator = rays @ np.asarray(normal, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        depth = -height / denominator
    depth[~(depth > 0)] = np.nan
    return DepthMap(depth)


def read_csv(path) -> list:
    """Rows of a report file as dicts of strings."""
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))
