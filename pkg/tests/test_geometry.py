"""
Tests for the pinhole model and normal estimation.
"""

import numpy as np
import pytest

from src.errors import BehindCameraError, InvalidInputError
from src.models.camera import DepthMap, Intrinsics, Point3
from src.services.geometry import backproject, backproject_depth, normal_map, project
from src.services.simulator import SceneConfig, render_scene
from tests.conftest import plane_depth


@pytest.fixture
def kitti_like():
    return Intrinsics(fx=500.0, fy=500.0, cx=320.0, cy=96.0)


class TestBackproject:
    """Test back-projection of single pixels."""

    def test_principal_point_ray(self, kitti_like):
        """The principal point lifts onto the optical axis."""
        assert backproject(kitti_like, (320, 96), 10.0) == Point3(0.0, 0.0, 10.0)

    def test_off_axis_pixel(self, kitti_like):
        """Pixel 500 px right of center at 5 m lies 5 m to the right."""
        point = backproject(kitti_like, (820, 96), 5.0)
        assert point == pytest.approx((5.0, 0.0, 5.0))

    @pytest.mark.parametrize("depth", [0.0, -1.0, float("nan"), float("inf")])
    def test_invalid_depth(self, kitti_like, depth):
        """Nonpositive or non-finite depths are rejected."""
        with pytest.raises(InvalidInputError):
            backproject(kitti_like, (1, 1), depth)

    def test_scale_equivariance(self, kitti_like):
        """Scaling depth scales the point exactly."""
        base = np.array(backproject(kitti_like, (123.5, 40.25), 7.0))
        scaled = np.array(backproject(kitti_like, (123.5, 40.25), 21.0))
        np.testing.assert_allclose(scaled, 3.0 * base, rtol=1e-15)


class TestProject:
    """Test projection back into the image."""

    def test_known_points(self, kitti_like):
        assert project(kitti_like, Point3(0.0, 0.0, 10.0)) == ((320.0, 96.0), 10.0)
        pixel, depth = project(kitti_like, Point3(5.0, 0.0, 5.0))
        assert pixel == pytest.approx((820.0, 96.0))
        assert depth == 5.0

    @pytest.mark.parametrize("z", [0.0, -2.0])
    def test_behind_camera(self, kitti_like, z):
        with pytest.raises(BehindCameraError):
            project(kitti_like, Point3(1.0, 1.0, z))

    def test_round_trip(self, kitti_like, rng):
        """project(backproject(p, d)) returns p and d."""
        for _ in range(100):
            pixel = (rng.uniform(-200, 900), rng.uniform(-100, 300))
            depth = rng.uniform(0.1, 100.0)
            (u, v), z = project(kitti_like, backproject(kitti_like, pixel, depth))
            assert u == pytest.approx(pixel[0], rel=1e-9, abs=1e-9)
            assert v == pytest.approx(pixel[1], rel=1e-9, abs=1e-9)
            assert z == pytest.approx(depth, rel=1e-9)


class TestBackprojectDepth:
    """Test dense back-projection."""

    def test_invalid_pixels_are_nan(self, small_intrinsics):
        values = np.full((30, 40), 4.0)
        values[3, 5] = np.nan
        values[7, 9] = -1.0
        points = backproject_depth(DepthMap(values), small_intrinsics)
        assert np.isnan(points[3, 5]).all()
        assert np.isnan(points[7, 9]).all()
        np.testing.assert_allclose(points[15, 20], [0.0, 0.0, 4.0])


class TestNormalMap:
    """Test per-pixel normals from the 8-neighborhood."""

    def test_fronto_parallel_plane(self, small_intrinsics):
        """Constant depth faces the camera."""
        normals = normal_map(DepthMap(np.full((30, 40), 5.0)), small_intrinsics)
        assert normals.valid[1:-1, 1:-1].all()
        np.testing.assert_allclose(normals.vectors[normals.valid], np.tile([0.0, 0.0, -1.0], (28 * 38, 1)), atol=1e-12)

    def test_border_is_invalid(self, small_intrinsics):
        normals = normal_map(DepthMap(np.full((30, 40), 5.0)), small_intrinsics)
        assert not normals.valid[0].any()
        assert not normals.valid[-1].any()
        assert not normals.valid[:, 0].any()
        assert not normals.valid[:, -1].any()

    def test_incomplete_neighborhood_is_invalid(self, small_intrinsics):
        """A hole invalidates itself and its eight neighbors."""
        values = np.full((30, 40), 5.0)
        values[10, 10] = np.nan
        normals = normal_map(DepthMap(values), small_intrinsics)
        assert not normals.valid[9:12, 9:12].any()
        assert normals.valid[8, 8]

    def test_level_ground_plane(self, intrinsics):
        """A level camera over the simulated road sees normals pointing up."""
        scene = SceneConfig(intrinsics=intrinsics, width=640, height=320, camera_height=1.65)
        rendered = render_scene(scene)
        normals = normal_map(rendered.depth, scene.intrinsics)
        usable = rendered.road_mask & normals.valid
        assert usable.sum() > 10000
        np.testing.assert_allclose(normals.vectors[usable], np.tile([0.0, -1.0, 0.0], (usable.sum(), 1)), atol=1e-4)

    def test_tilted_plane_orientation(self, small_intrinsics):
        """Normals of an analytic plane match it and face the camera."""
        normal = np.array([0.0, -np.cos(0.2), -np.sin(0.2)])
        depth = plane_depth(small_intrinsics, (30, 40), normal, 1.5)
        normals = normal_map(depth, small_intrinsics)
        points = backproject_depth(depth, small_intrinsics)
        assert normals.valid.any()
        np.testing.assert_allclose(normals.vectors[normals.valid], np.tile(normal, (normals.valid.sum(), 1)), atol=1e-9)
        assert (np.einsum("ij,ij->i", normals.vectors[normals.valid], points[normals.valid]) < 0).all()

    def test_unit_length_and_scale_invariance(self, box_scene):
        rendered = render_scene(box_scene)
        base = normal_map(rendered.depth, box_scene.intrinsics)
        lengths = np.linalg.norm(base.vectors[base.valid], axis=-1)
        np.testing.assert_allclose(lengths, 1.0, atol=1e-6)
        for k in (0.1, 3.0, 10.0):
            scaled = normal_map(rendered.depth.scaled(k), box_scene.intrinsics)
            np.testing.assert_array_equal(scaled.valid, base.valid)
            np.testing.assert_allclose(scaled.vectors[base.valid], base.vectors[base.valid], atol=1e-6)

    def test_tiny_map_has_no_normals(self, small_intrinsics):
        normals = normal_map(DepthMap(np.ones((2, 5))), small_intrinsics)
        assert not normals.valid.any()
