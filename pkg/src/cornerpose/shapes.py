"""Procedural test meshes: boxes, an L-shaped prism, UV spheres.

All builders emit closed, consistently wound (outward-facing) triangle
meshes suitable for corner extraction and rendering.
"""

import numpy as np

from .mesh import Mesh

__all__ = ["make_box", "make_cube", "make_lshape_prism", "make_uv_sphere", "obj_text"]


def make_box(sx: float, sy: float, sz: float, center=(0.0, 0.0, 0.0)) -> Mesh:
    """Axis-aligned box with side lengths (sx, sy, sz)."""
    cx, cy, cz = center
    hx, hy, hz = sx / 2.0, sy / 2.0, sz / 2.0
    v = np.array(
        [
            [cx - hx, cy - hy, cz - hz],
            [cx + hx, cy - hy, cz - hz],
            [cx + hx, cy + hy, cz - hz],
            [cx - hx, cy + hy, cz - hz],
            [cx - hx, cy - hy, cz + hz],
            [cx + hx, cy - hy, cz + hz],
            [cx + hx, cy + hy, cz + hz],
            [cx - hx, cy + hy, cz + hz],
        ]
    )
    t = np.array(
        [
            [0, 2, 1], [0, 3, 2],  # bottom (-z)
            [4, 5, 6], [4, 6, 7],  # top (+z)
            [0, 1, 5], [0, 5, 4],  # front (-y)
            [2, 3, 7], [2, 7, 6],  # back (+y)
            [1, 2, 6], [1, 6, 5],  # right (+x)
            [3, 0, 4], [3, 4, 7],  # left (-x)
        ]
    )
    return Mesh(v, t)


def make_cube(size: float = 1.0, center=(0.0, 0.0, 0.0)) -> Mesh:
    return make_box(size, size, size, center)


def make_lshape_prism(
    leg_x: float = 2.0,
    leg_y: float = 1.5,
    thickness: float = 0.75,
    depth: float = 1.0,
) -> Mesh:
    """L-shaped prism: an L cross-section in the xy plane extruded along z.

    The cross-section polygon is (0,0) (leg_x,0) (leg_x,t) (t,t)
    (t,leg_y) (0,leg_y); it is star-shaped from the origin, so a
    triangle fan from vertex 0 triangulates each cap without extra
    vertices.  12 vertices, 20 triangles, 12 trihedral corners.  The
    defaults make the three distances unequal, so the solid has no
    rotational self-symmetry (unequal legs also break the 180-degree
    leg-swap rotation).
    """
    if min(leg_x, leg_y, thickness, depth) <= 0.0 or thickness >= min(leg_x, leg_y):
        raise ValueError("need 0 < thickness < min(leg_x, leg_y) and positive depth")
    t = thickness
    ring = np.array(
        [[0, 0], [leg_x, 0], [leg_x, t], [t, t], [t, leg_y], [0, leg_y]], dtype=float
    )
    bottom = np.hstack([ring, np.zeros((6, 1))])
    top = np.hstack([ring, np.full((6, 1), depth)])
    v = np.vstack([bottom, top])
    tris = []
    for k in range(1, 5):  # caps: fan from vertex 0
        tris.append([0, k + 1, k])            # bottom, -z outward
        tris.append([6, 6 + k, 6 + k + 1])    # top, +z outward
    for i in range(6):  # side walls
        j = (i + 1) % 6
        tris.append([i, j, 6 + j])
        tris.append([i, 6 + j, 6 + i])
    return Mesh(v, np.asarray(tris))


def make_uv_sphere(radius: float = 1.0, stacks: int = 16, slices: int = 32, center=(0.0, 0.0, 0.0)) -> Mesh:
    """Latitude/longitude sphere with pole fans."""
    cx, cy, cz = center
    verts = [[cx, cy, cz + radius]]
    for i in range(1, stacks):
        phi = np.pi * i / stacks
        for j in range(slices):
            theta = 2.0 * np.pi * j / slices
            verts.append(
                [
                    cx + radius * np.sin(phi) * np.cos(theta),
                    cy + radius * np.sin(phi) * np.sin(theta),
                    cz + radius * np.cos(phi),
                ]
            )
    verts.append([cx, cy, cz - radius])
    south = len(verts) - 1

    def ring(i, j):
        return 1 + (i - 1) * slices + (j % slices)

    tris = []
    for j in range(slices):
        tris.append([0, ring(1, j), ring(1, j + 1)])
    for i in range(1, stacks - 1):
        for j in range(slices):
            a, b = ring(i, j), ring(i, j + 1)
            c, d = ring(i + 1, j), ring(i + 1, j + 1)
            tris.append([a, c, d])
            tris.append([a, d, b])
    for j in range(slices):
        tris.append([south, ring(stacks - 1, j + 1), ring(stacks - 1, j)])
    return Mesh(np.asarray(verts), np.asarray(tris))


def obj_text(mesh: Mesh) -> str:
    """Wavefront OBJ text for a mesh (vertices and triangles only)."""
    lines = []
    for v in mesh.vertices:
        lines.append("v {!r} {!r} {!r}".format(*(float(x) for x in v)))
    for t in mesh.triangles:
        lines.append(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}")
    return "\n".join(lines) + "\n"
