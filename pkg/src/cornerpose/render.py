"""CPU rasterization of feature edges and silhouettes, and the image
cross-correlation used to compare them.

Rendering contract, shared with the tests' independent oracle:

* camera points with z <= 1e-6 are clipped away (segments and triangles
  are cut at that plane),
* edge segments are clipped to a frame rectangle expanded by 2 pixels
  (Liang-Barsky) and drawn with an integer DDA that rounds via
  floor(x + 0.5),
* a mask pixel is set when its center (integer coordinates) lies inside
  or on the boundary of any projected triangle.
"""

from dataclasses import dataclass

import numpy as np

from .geometry import CameraIntrinsics, Pose
from .mesh import DEFAULT_SHARP_ANGLE_TOL, Mesh, sharp_edges

__all__ = [
    "DimensionMismatchError",
    "Raster",
    "render_edges",
    "render_mask",
    "normalized_cross_correlation",
    "pgm_bytes",
    "write_pgm",
]

Z_CLIP = 1e-6
_VAR_FLOOR = 1e-24


class DimensionMismatchError(ValueError):
    """Rasters of different sizes cannot be compared."""


@dataclass(frozen=True, eq=False)
class Raster:
    """A width x height grayscale image with values in [0, 1].

    ``values`` is indexed [row, column] = [v, u].
    """

    width: int
    height: int
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.height, self.width):
            raise ValueError(
                f"values shape {v.shape} does not match {self.height}x{self.width}"
            )
        if v.size and (float(v.min()) < 0.0 or float(v.max()) > 1.0):
            raise ValueError("raster values must lie in [0, 1]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, width: int, height: int) -> "Raster":
        return cls(width=width, height=height, values=np.zeros((height, width)))


def _project_camera_points(cam, intrinsics):
    uv = np.empty((len(cam), 2))
    uv[:, 0] = intrinsics.fx * cam[:, 0] / cam[:, 2] + intrinsics.cx
    uv[:, 1] = intrinsics.fy * cam[:, 1] / cam[:, 2] + intrinsics.cy
    return uv


def _clip_segment_rect(p0, p1, xmin, xmax, ymin, ymax):
    """Liang-Barsky clip; returns (q0, q1) or None if fully outside."""
    d = p1 - p0
    t0, t1 = 0.0, 1.0
    for coord, lo, hi in ((0, xmin, xmax), (1, ymin, ymax)):
        p, q = -d[coord], p0[coord] - lo
        for pp, qq in ((p, q), (d[coord], hi - p0[coord])):
            if pp == 0.0:
                if qq < 0.0:
                    return None
                continue
            r = qq / pp
            if pp < 0.0:
                if r > t1:
                    return None
                t0 = max(t0, r)
            else:
                if r < t0:
                    return None
                t1 = min(t1, r)
    return p0 + t0 * d, p0 + t1 * d


def _draw_segment(values, p0, p1):
    """Integer DDA with floor(x + 0.5) rounding; plots in-bounds pixels."""
    h, w = values.shape
    clipped = _clip_segment_rect(p0, p1, -2.0, w + 1.0, -2.0, h + 1.0)
    if clipped is None:
        return
    q0, q1 = clipped
    x0 = int(np.floor(q0[0] + 0.5))
    y0 = int(np.floor(q0[1] + 0.5))
    x1 = int(np.floor(q1[0] + 0.5))
    y1 = int(np.floor(q1[1] + 0.5))
    steps = max(abs(x1 - x0), abs(y1 - y0))
    if steps == 0:
        if 0 <= x0 < w and 0 <= y0 < h:
            values[y0, x0] = 1.0
        return
    i = np.arange(steps + 1, dtype=float)
    xs = np.floor(x0 + i * (x1 - x0) / steps + 0.5).astype(np.int64)
    ys = np.floor(y0 + i * (y1 - y0) / steps + 0.5).astype(np.int64)
    ok = (xs >= 0) & (xs < w) & (ys >= 0) & (ys < h)
    values[ys[ok], xs[ok]] = 1.0


def _binomial_blur(values):
    """3x3 binomial filter (1 2 1 outer product / 16), zero padding."""
    padded = np.pad(values, 1)
    horiz = (padded[:, :-2] + 2.0 * padded[:, 1:-1] + padded[:, 2:]) / 4.0
    return (horiz[:-2] + 2.0 * horiz[1:-1] + horiz[2:]) / 4.0


def render_edges(
    mesh: Mesh,
    pose: Pose,
    intrinsics: CameraIntrinsics,
    sharp_angle_tol: float = DEFAULT_SHARP_ANGLE_TOL,
    blur: bool = False,
) -> Raster:
    """Line rendering of the mesh's sharp edges.

    An edge is culled only when every adjacent face is back-facing
    (outward normal pointing away from the camera), which keeps
    silhouette edges (one visible side) and front creases (both
    visible) and drops the hidden far side.  Segments are clipped at
    z = 1e-6 and rasterized as 1-valued lines; ``blur`` applies one
    3x3 binomial pass.
    """
    values = np.zeros((intrinsics.height, intrinsics.width))
    welded, edges, edge_faces = sharp_edges(mesh, sharp_angle_tol)
    if len(edges):
        cam = pose.transform(welded.vertices)
        tri = welded.triangles
        if len(tri):
            v0 = cam[tri[:, 0]]
            normals = np.cross(cam[tri[:, 1]] - v0, cam[tri[:, 2]] - v0)
            centroids = (v0 + cam[tri[:, 1]] + cam[tri[:, 2]]) / 3.0
            backfacing = np.einsum("ij,ij->i", normals, centroids) > 0.0
        else:
            backfacing = np.zeros(0, dtype=bool)
        for (a, b), faces in zip(edges, edge_faces):
            if faces and all(backfacing[f] for f in faces):
                continue
            pa, pb = cam[a], cam[b]
            za, zb = pa[2], pb[2]
            if za <= Z_CLIP and zb <= Z_CLIP:
                continue
            if za <= Z_CLIP or zb <= Z_CLIP:
                t = (Z_CLIP - za) / (zb - za)
                cut = pa + t * (pb - pa)
                if za <= Z_CLIP:
                    pa = cut
                else:
                    pb = cut
            uv = _project_camera_points(np.array([pa, pb]), intrinsics)
            _draw_segment(values, uv[0], uv[1])
    if blur:
        values = _binomial_blur(values)
    return Raster(width=intrinsics.width, height=intrinsics.height, values=values)


def _clip_polygon_z(points):
    """Sutherland-Hodgman clip of a camera-space polygon to z >= Z_CLIP."""
    out = []
    n = len(points)
    for i in range(n):
        cur, nxt = points[i], points[(i + 1) % n]
        cur_in, nxt_in = cur[2] >= Z_CLIP, nxt[2] >= Z_CLIP
        if cur_in:
            out.append(cur)
        if cur_in != nxt_in:
            t = (Z_CLIP - cur[2]) / (nxt[2] - cur[2])
            out.append(cur + t * (nxt - cur))
    return out


def render_mask(mesh: Mesh, pose: Pose, intrinsics: CameraIntrinsics) -> Raster:
    """Binary silhouette: 1 where any projected triangle covers the pixel
    center.  No depth buffer; triangles crossing the camera plane are
    clipped at z = 1e-6.
    """
    w, h = intrinsics.width, intrinsics.height
    values = np.zeros((h, w))
    if len(mesh.triangles):
        cam = pose.transform(mesh.vertices)
        for tri in mesh.triangles:
            poly = _clip_polygon_z([cam[i] for i in tri])
            if len(poly) < 3:
                continue
            uv = _project_camera_points(np.asarray(poly), intrinsics)
            area = 0.0
            for i in range(len(uv)):
                j = (i + 1) % len(uv)
                area += uv[i, 0] * uv[j, 1] - uv[j, 0] * uv[i, 1]
            if abs(area) < 1e-12:
                continue
            if area < 0.0:
                uv = uv[::-1]
            x0 = max(0, int(np.ceil(uv[:, 0].min())))
            x1 = min(w - 1, int(np.floor(uv[:, 0].max())))
            y0 = max(0, int(np.ceil(uv[:, 1].min())))
            y1 = min(h - 1, int(np.floor(uv[:, 1].max())))
            if x0 > x1 or y0 > y1:
                continue
            gx, gy = np.meshgrid(
                np.arange(x0, x1 + 1, dtype=float),
                np.arange(y0, y1 + 1, dtype=float),
            )
            inside = np.ones(gx.shape, dtype=bool)
            for i in range(len(uv)):
                j = (i + 1) % len(uv)
                ex, ey = uv[j, 0] - uv[i, 0], uv[j, 1] - uv[i, 1]
                inside &= ex * (gy - uv[i, 1]) - ey * (gx - uv[i, 0]) >= 0.0
            values[y0:y1 + 1, x0:x1 + 1][inside] = 1.0
    return Raster(width=w, height=h, values=values)


def normalized_cross_correlation(a: Raster, b: Raster) -> float:
    """Zero-mean NCC in [-1, 1]; 0 when either raster has no variance."""
    if (a.width, a.height) != (b.width, b.height):
        raise DimensionMismatchError(
            f"raster sizes differ: {a.width}x{a.height} vs {b.width}x{b.height}"
        )
    da = a.values - a.values.mean()
    db = b.values - b.values.mean()
    va = float((da * da).sum())
    vb = float((db * db).sum())
    if va <= _VAR_FLOOR or vb <= _VAR_FLOOR:
        return 0.0
    return float((da * db).sum() / np.sqrt(va * vb))


def pgm_bytes(raster: Raster) -> bytes:
    """Binary PGM (P5, maxval 255) encoding of a raster."""
    header = f"P5\n{raster.width} {raster.height}\n255\n".encode("ascii")
    body = np.floor(raster.values * 255.0 + 0.5).astype(np.uint8).tobytes()
    return header + body


def write_pgm(raster: Raster, path) -> None:
    with open(path, "wb") as fh:
        fh.write(pgm_bytes(raster))
