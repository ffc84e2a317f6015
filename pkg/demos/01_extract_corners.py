"""
Finding trihedral corners in a mesh
===================================

A trihedral corner is a vertex where three mutually orthogonal sharp
edges meet.  Each corner gets a local frame (apex + three axis rows)
and seven control points: the apex plus a +/- step along every axis.
"""

import numpy as np

from cornerpose.corners import control_points
from cornerpose.estimator import ObjectModel
from cornerpose.mesh import extract_corners
from cornerpose.shapes import make_cube, make_lshape_prism

np.set_printoptions(precision=3, suppress=True)

# the unit cube has eight corners, all axis aligned
cube = make_cube(1.0)
frames = extract_corners(cube)
print(f"unit cube: {len(frames)} corners")
for f in frames:
    print(f"  apex {f.apex}  axes rows {f.axes[0]} {f.axes[1]} {f.axes[2]}")

# an L-shaped prism has twelve; the concave ones count too
lshape = make_lshape_prism()
frames = extract_corners(lshape)
print(f"\nL-prism: {len(frames)} corners, apexes:")
print(np.array([f.apex for f in frames]))

# control points: index 0 is the apex, pairs (1,2), (3,4), (5,6) sit at
# apex +/- scale * axis_k.  Scale defaults to 10% of the mesh diameter.
model = ObjectModel.from_mesh(cube)
corner = model.corners[0]
print(f"\ncontrol scale = {corner.scale:.4f} (diameter {model.diameter:.4f})")
print("first corner's control points:")
print(corner.points)

# a sphere has no sharp orthogonal triples at all
from cornerpose.shapes import make_uv_sphere

print(f"\nsphere corners: {len(extract_corners(make_uv_sphere(1.0)))}")
