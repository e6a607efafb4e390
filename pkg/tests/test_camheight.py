"""
Tests for road-pixel camera heights and the road normal.
"""

import numpy as np
import pytest

from src.errors import DegenerateGeometryError, FrameUnusableError, InvalidInputError
from src.models.camera import DepthMap, Intrinsics, NormalMap
from src.services.camheight import frame_camera_height, per_pixel_camera_height, road_normal
from src.services.geometry import normal_map
from src.services.simulator import SceneConfig, render_scene


def _heights(rendered, intr):
    normals = normal_map(rendered.depth, intr)
    return per_pixel_camera_height(rendered.depth, normals, rendered.road_mask, intr), normals


class TestPerPixelCameraHeight:
    """Test H'(p) = -phi(p) . n(p)."""

    def test_single_ground_point(self):
        """A point 1.65 m below a level camera is 1.65 m away from the plane."""
        # Pixel (1, 1) at depth 10 back-projects to (0, 1.65, 10).
        intr = Intrinsics(fx=100.0, fy=100.0, cx=1.0, cy=-15.5)
        depth = DepthMap(np.full((3, 3), 10.0))
        vectors = np.tile([0.0, -1.0, 0.0], (3, 3, 1))
        normals = NormalMap(vectors, np.ones((3, 3), dtype=bool))
        road = np.zeros((3, 3), dtype=bool)
        road[1, 1] = True
        heights = per_pixel_camera_height(depth, normals, road, intr)
        assert heights[1, 1] == pytest.approx(1.65)
        assert np.isnan(heights[0, 0])

    def test_pitched_scene_matches_truth(self, intrinsics):
        """Every valid road pixel of a 5 degree pitched scene is within 1% of the true height."""
        scene = SceneConfig(intrinsics=intrinsics, width=640, height=320, camera_height=1.4, pitch_deg=5.0)
        heights, _ = _heights(render_scene(scene), intrinsics)
        values = heights[np.isfinite(heights)]
        assert values.size > 10000
        np.testing.assert_allclose(values, 1.4, rtol=0.01)

    def test_scale_equivariance(self, box_scene):
        rendered = render_scene(box_scene)
        base, _ = _heights(rendered, box_scene.intrinsics)
        for k in (0.1, 0.5, 2.0, 10.0):
            normals = normal_map(rendered.depth.scaled(k), box_scene.intrinsics)
            depth = rendered.depth.scaled(k)
            scaled = per_pixel_camera_height(depth, normals, rendered.road_mask, box_scene.intrinsics)
            finite = np.isfinite(base)
            np.testing.assert_allclose(scaled[finite], k * base[finite], rtol=1e-6)

    def test_shape_mismatch(self, small_intrinsics):
        depth = DepthMap(np.ones((30, 40)))
        normals = normal_map(depth, small_intrinsics)
        with pytest.raises(InvalidInputError):
            per_pixel_camera_height(depth, normals, np.ones((10, 10), dtype=bool), small_intrinsics)


class TestFrameCameraHeight:
    """Test the per-frame median."""

    def test_odd_count_median(self):
        heights = np.array([[1.6, 1.7, 1.8]])
        assert frame_camera_height(heights, np.ones((1, 3), dtype=bool)).value == pytest.approx(1.7)

    def test_even_count_midpoint(self):
        heights = np.array([[1.6, 1.8, np.nan]])
        result = frame_camera_height(heights, np.ones((1, 3), dtype=bool))
        assert result.value == pytest.approx(1.7)
        assert result.scaled is False

    def test_only_road_pixels_count(self):
        heights = np.array([[1.0, 5.0, 9.0]])
        road = np.array([[True, False, False]])
        assert frame_camera_height(heights, road).value == 1.0

    def test_empty_road(self):
        with pytest.raises(FrameUnusableError):
            frame_camera_height(np.ones((2, 2)), np.zeros((2, 2), dtype=bool))

    def test_no_valid_height(self):
        with pytest.raises(FrameUnusableError):
            frame_camera_height(np.full((2, 2), np.nan), np.ones((2, 2), dtype=bool))

    def test_nonpositive_median(self):
        with pytest.raises(DegenerateGeometryError):
            frame_camera_height(np.full((2, 2), -0.5), np.ones((2, 2), dtype=bool))

    def test_simulated_truth(self, flat_scene):
        rendered = render_scene(flat_scene)
        heights, _ = _heights(rendered, flat_scene.intrinsics)
        assert frame_camera_height(heights, rendered.road_mask).value == pytest.approx(1.5, rel=0.005)

    def test_exact_scale_equivariance(self, box_scene):
        rendered = render_scene(box_scene)
        heights, _ = _heights(rendered, box_scene.intrinsics)
        base = frame_camera_height(heights, rendered.road_mask).value
        for k in (0.1, 0.5, 2.0, 10.0):
            depth = rendered.depth.scaled(k)
            normals = normal_map(depth, box_scene.intrinsics)
            scaled = per_pixel_camera_height(depth, normals, rendered.road_mask, box_scene.intrinsics)
            assert frame_camera_height(scaled, rendered.road_mask).value == pytest.approx(k * base, rel=1e-6)

    def test_median_robustness(self, flat_scene, rng):
        """Corrupting a minority of road pixels moves the height less than the clean spread."""
        rendered = render_scene(flat_scene)
        heights, _ = _heights(rendered, flat_scene.intrinsics)
        clean = heights[np.isfinite(heights) & rendered.road_mask]
        corrupted = heights.copy()
        rows, cols = np.nonzero(np.isfinite(heights) & rendered.road_mask)
        picked = rng.choice(rows.size, size=int(0.4 * rows.size), replace=False)
        corrupted[rows[picked], cols[picked]] = 50.0
        shift = abs(
            frame_camera_height(corrupted, rendered.road_mask).value
            - frame_camera_height(heights, rendered.road_mask).value
        )
        assert shift <= clean.max() - clean.min() + 1e-12


class TestRoadNormal:
    """Test the component-wise median normal."""

    def test_constant_normals(self):
        vectors = np.tile([0.0, -1.0, 0.0], (4, 4, 1))
        normals = NormalMap(vectors, np.ones((4, 4), dtype=bool))
        np.testing.assert_allclose(road_normal(normals, np.ones((4, 4), dtype=bool)), [0.0, -1.0, 0.0])

    def test_unit_length(self, box_scene):
        rendered = render_scene(box_scene)
        normals = normal_map(rendered.depth, box_scene.intrinsics)
        normal = road_normal(normals, rendered.road_mask)
        assert np.linalg.norm(normal) == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(normal, box_scene.road_normal, atol=1e-4)

    def test_noisy_plane(self, intrinsics):
        """1% depth noise keeps the normal within a degree of the truth."""
        scene = SceneConfig(intrinsics=intrinsics, width=640, height=320, camera_height=1.6, pitch_deg=4.0, noise=0.01)
        rendered = render_scene(scene)
        normal = road_normal(normal_map(rendered.depth, intrinsics), rendered.road_mask)
        angle = np.degrees(np.arccos(np.clip(normal @ scene.road_normal, -1.0, 1.0)))
        assert angle < 1.0

    def test_scale_invariance(self, box_scene):
        rendered = render_scene(box_scene)
        base = road_normal(normal_map(rendered.depth, box_scene.intrinsics), rendered.road_mask)
        scaled = road_normal(normal_map(rendered.depth.scaled(7.0), box_scene.intrinsics), rendered.road_mask)
        np.testing.assert_allclose(scaled, base, atol=1e-9)

    def test_empty_set(self):
        normals = NormalMap(np.full((3, 3, 3), np.nan), np.zeros((3, 3), dtype=bool))
        with pytest.raises(FrameUnusableError):
            road_normal(normals, np.ones((3, 3), dtype=bool))

    def test_zero_median(self):
        vectors = np.array([[[0.0, 1.0, 0.0], [0.0, -1.0, 0.0]]])
        normals = NormalMap(vectors, np.ones((1, 2), dtype=bool))
        with pytest.raises(DegenerateGeometryError):
            road_normal(normals, np.ones((1, 2), dtype=bool))
