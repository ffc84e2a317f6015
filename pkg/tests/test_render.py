"""Edge/silhouette rasterization and image correlation.

The drawing contract under test (rounding, clipping, pixel-center
coverage) is re-derived here in plain Python and by hand-built exact
fixtures, not by calling back into the renderer.
"""

import math

import numpy as np
import pytest

from cornerpose.geometry import CameraIntrinsics, Pose, rotation_from_vector
from cornerpose.mesh import Mesh
from cornerpose.render import (
    DimensionMismatchError,
    Raster,
    _binomial_blur,
    _draw_segment,
    normalized_cross_correlation,
    pgm_bytes,
    render_edges,
    render_mask,
    write_pgm,
)
from cornerpose.shapes import make_cube, make_uv_sphere

CAM = CameraIntrinsics(width=200, height=200, fx=350.0, fy=350.0, cx=99.5, cy=99.5)


class TestRaster:
    def test_zeros(self):
        r = Raster.zeros(4, 3)
        assert r.values.shape == (3, 4)
        assert r.values.sum() == 0.0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            Raster(width=4, height=3, values=np.zeros((4, 3)))

    def test_range_check(self):
        with pytest.raises(ValueError):
            Raster(width=2, height=2, values=np.full((2, 2), 1.5))

    def test_readonly(self):
        r = Raster.zeros(2, 2)
        with pytest.raises(ValueError):
            r.values[0, 0] = 1.0


def _reference_pixels(p0, p1):
    """The documented rasterization: endpoints and samples rounded with
    floor(x + 0.5), one sample per unit of the dominant axis."""
    x0 = math.floor(p0[0] + 0.5)
    y0 = math.floor(p0[1] + 0.5)
    x1 = math.floor(p1[0] + 0.5)
    y1 = math.floor(p1[1] + 0.5)
    steps = max(abs(x1 - x0), abs(y1 - y0))
    if steps == 0:
        return {(x0, y0)}
    out = set()
    for i in range(steps + 1):
        out.add(
            (
                math.floor(x0 + i * (x1 - x0) / steps + 0.5),
                math.floor(y0 + i * (y1 - y0) / steps + 0.5),
            )
        )
    return out


class TestSegmentDrawing:
    def test_matches_reference_inside_frame(self, rng):
        for _ in range(50):
            p0 = rng.uniform(5.0, 195.0, size=2)
            p1 = rng.uniform(5.0, 195.0, size=2)
            values = np.zeros((200, 200))
            _draw_segment(values, p0, p1)
            got = {(x, y) for y, x in zip(*np.nonzero(values))}
            assert got == _reference_pixels(p0, p1)

    def test_single_pixel(self):
        values = np.zeros((10, 10))
        _draw_segment(values, np.array([4.2, 7.9]), np.array([4.2, 7.9]))
        assert values.sum() == 1.0
        assert values[8, 4] == 1.0

    def test_offscreen_endpoints_still_cross(self):
        # clipping keeps the visible run of a line crossing the frame
        values = np.zeros((50, 80))
        _draw_segment(values, np.array([-500.0, 20.0]), np.array([500.0, 20.0]))
        assert np.array_equal(np.nonzero(values.sum(axis=0))[0], np.arange(80))
        assert values.sum() == 80.0

    def test_fully_offscreen(self):
        values = np.zeros((50, 80))
        _draw_segment(values, np.array([-50.0, -10.0]), np.array([-5.0, -90.0]))
        assert values.sum() == 0.0


class TestRenderEdges:
    def test_face_on_cube_draws_exact_ring(self):
        # cube of side 1 at depth 4: the front face spans u, v in
        # [49.5, 149.5], whose endpoints round to pixels 50 and 150
        pose = Pose(np.eye(3), np.array([0.0, 0.0, 4.0]))
        r = render_edges(make_cube(1.0), pose, CAM)
        ring = np.zeros((200, 200))
        ring[50, 50:151] = 1.0
        ring[150, 50:151] = 1.0
        ring[50:151, 50] = 1.0
        ring[50:151, 150] = 1.0
        assert np.array_equal(r.values, ring)

    def test_far_side_is_culled(self):
        # the ring above is only the near square: the 8 hidden edges
        # (back face and the 4 connecting creases) contribute nothing
        pose = Pose(np.eye(3), np.array([0.0, 0.0, 4.0]))
        r = render_edges(make_cube(1.0), pose, CAM)
        assert int(r.values.sum()) == 4 * 101 - 4

    def test_tilted_cube_draws_silhouette(self):
        pose = Pose(
            rotation_from_vector(np.array([0.3, 0.4, 0.0])),
            np.array([0.0, 0.0, 4.0]),
        )
        r = render_edges(make_cube(1.0), pose, CAM)
        # three visible faces: 6 silhouette edges plus 3 front creases
        assert r.values.sum() > 400.0

    def test_behind_camera_renders_empty(self):
        pose = Pose(np.eye(3), np.array([0.0, 0.0, -4.0]))
        r = render_edges(make_cube(1.0), pose, CAM)
        assert r.values.sum() == 0.0

    def test_straddling_triangle_is_clipped(self):
        # one vertex behind the camera: the segment is cut at the z
        # plane and the visible part still draws
        mesh = Mesh(
            [[-0.5, 0.1, 1.0], [0.5, 0.1, 1.0], [0.0, 0.1, -1.0]],
            [[0, 2, 1]],
        )
        r = render_edges(mesh, Pose(np.eye(3), np.zeros(3)), CAM)
        assert r.values.sum() > 0.0

    def test_blur_spreads_and_preserves_range(self):
        pose = Pose(np.eye(3), np.array([0.0, 0.0, 4.0]))
        sharp = render_edges(make_cube(1.0), pose, CAM)
        soft = render_edges(make_cube(1.0), pose, CAM, blur=True)
        assert (soft.values > 0.0).sum() > (sharp.values > 0.0).sum()
        assert soft.values.max() <= 1.0


class TestRenderMask:
    def test_face_on_square_exact_block(self):
        # centers 50..149 lie within the projected square [49.5, 149.5]
        mesh = Mesh(
            [[-0.5, -0.5, 0.0], [0.5, -0.5, 0.0], [0.5, 0.5, 0.0], [-0.5, 0.5, 0.0]],
            [[0, 1, 2], [0, 2, 3]],
        )
        r = render_mask(mesh, Pose(np.eye(3), np.array([0.0, 0.0, 3.5])), CAM)
        expected = np.zeros((200, 200))
        expected[50:150, 50:150] = 1.0
        assert np.array_equal(r.values, expected)

    def test_winding_does_not_matter(self):
        flipped = Mesh(
            [[-0.5, -0.5, 0.0], [0.5, -0.5, 0.0], [0.5, 0.5, 0.0], [-0.5, 0.5, 0.0]],
            [[2, 1, 0], [3, 2, 0]],
        )
        r = render_mask(flipped, Pose(np.eye(3), np.array([0.0, 0.0, 3.5])), CAM)
        assert r.values.sum() == 100.0 * 100.0

    def test_sphere_matches_disk_area(self):
        # exact silhouette radius of a sphere: f * r / sqrt(d^2 - r^2)
        mesh = make_uv_sphere(1.0, stacks=32, slices=64)
        cam = CameraIntrinsics(width=240, height=240, fx=300.0, fy=300.0, cx=119.5, cy=119.5)
        r = render_mask(mesh, Pose(np.eye(3), np.array([0.0, 0.0, 5.0])), cam)
        radius = 300.0 / math.sqrt(24.0)
        assert abs(r.values.sum() - math.pi * radius * radius) < 0.025 * math.pi * radius * radius

    def test_behind_camera_is_empty(self):
        r = render_mask(make_cube(1.0), Pose(np.eye(3), np.array([0.0, 0.0, -4.0])), CAM)
        assert r.values.sum() == 0.0

    def test_straddling_triangle_clipped_not_crashed(self):
        mesh = Mesh(
            [[-0.5, 0.1, 1.0], [0.5, 0.1, 1.0], [0.0, 0.1, -1.0]],
            [[0, 2, 1]],
        )
        r = render_mask(mesh, Pose(np.eye(3), np.zeros(3)), CAM)
        assert r.values.sum() > 0.0


class TestNcc:
    def test_hand_computed_value(self):
        a = Raster(width=2, height=2, values=np.array([[1.0, 0.0], [0.0, 0.0]]))
        b = Raster(width=2, height=2, values=np.array([[0.0, 1.0], [0.0, 0.0]]))
        # means 1/4; dot of centered images -1/4; variances 3/4 each
        assert abs(normalized_cross_correlation(a, b) - (-1.0 / 3.0)) < 1e-15

    def test_self_is_one(self, rng):
        img = rng.uniform(size=(8, 8))
        r = Raster(width=8, height=8, values=img)
        assert abs(normalized_cross_correlation(r, r) - 1.0) < 1e-12

    def test_complement_is_minus_one(self, rng):
        img = rng.uniform(size=(8, 8))
        a = Raster(width=8, height=8, values=img)
        b = Raster(width=8, height=8, values=1.0 - img)
        assert abs(normalized_cross_correlation(a, b) + 1.0) < 1e-12

    def test_flat_image_scores_zero(self):
        flat = Raster(width=4, height=4, values=np.full((4, 4), 0.5))
        bumpy = Raster(width=4, height=4, values=np.eye(4))
        assert normalized_cross_correlation(flat, bumpy) == 0.0

    def test_size_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            normalized_cross_correlation(Raster.zeros(4, 4), Raster.zeros(4, 5))


class TestBlur:
    def test_delta_spreads_to_binomial_kernel(self):
        img = np.zeros((5, 7))
        img[2, 3] = 1.0
        out = _binomial_blur(img)
        kernel = np.array([[1, 2, 1], [2, 4, 2], [1, 2, 1]]) / 16.0
        expected = np.zeros((5, 7))
        expected[1:4, 2:5] = kernel
        assert np.allclose(out, expected, atol=1e-15)
        assert abs(out.sum() - 1.0) < 1e-12

    def test_zero_padding_loses_mass_at_border(self):
        img = np.zeros((5, 5))
        img[0, 0] = 1.0
        out = _binomial_blur(img)
        assert abs(out.sum() - 9.0 / 16.0) < 1e-12  # corner keeps 9/16


class TestPgm:
    def test_bytes_layout(self):
        values = np.array([[0.0, 0.5], [1.0, 0.0], [0.25, 0.75]])
        raster = Raster(width=2, height=3, values=values)
        data = pgm_bytes(raster)
        assert data.startswith(b"P5\n2 3\n255\n")
        body = data[len(b"P5\n2 3\n255\n"):]
        assert list(body) == [0, 128, 255, 0, 64, 191]

    def test_write(self, tmp_path):
        path = tmp_path / "out.pgm"
        write_pgm(Raster.zeros(3, 2), path)
        assert path.read_bytes() == b"P5\n3 2\n255\n" + bytes(6)
