"""
The three-fold corner ambiguity
===============================

Looking straight at a corner you cannot tell its three edges apart:
rotating 120 degrees about the corner diagonal maps the corner onto
itself.  On the control points that rotation is a pure relabeling, and
the two views (rotate in 3D, or permute indices) must agree after
projection.
"""

import numpy as np

from cornerpose.corners import (
    INDEX_MAPS,
    CornerFrame,
    CornerSymmetry,
    compose_symmetries,
    control_points,
    symmetry_rotation,
)
from cornerpose.geometry import CameraIntrinsics, Pose, project

np.set_printoptions(precision=2, suppress=True)

for sym in CornerSymmetry:
    print(f"{sym.name:10s} relabels indices as {INDEX_MAPS[sym.value]}")

# the rotation behind the relabeling: 120 degrees about (1,1,1)/sqrt(3)
r120 = symmetry_rotation(CornerSymmetry.TWIST_120)
print("\n120-degree twist matrix:")
print(r120)
print(f"R^3 - I max deviation: {np.abs(np.linalg.matrix_power(r120, 3) - np.eye(3)).max():.1e}")

# rotate-then-project equals project-then-relabel
corner = control_points(CornerFrame(apex=np.zeros(3), axes=np.eye(3)), 0.2)
intr = CameraIntrinsics(fx=600.0, fy=600.0, cx=319.5, cy=239.5, width=640, height=480)
pose = Pose(np.eye(3), np.array([0.1, -0.2, 5.0]))

plain = project(intr, pose, corner.points)
for sym in CornerSymmetry:
    twisted = project(intr, Pose(pose.rotation @ symmetry_rotation(sym), pose.translation), corner.points)
    gap = np.abs(twisted - plain[INDEX_MAPS[sym.value]]).max()
    print(f"{sym.name:10s} rotate-vs-relabel pixel gap: {gap:.1e}")

print("\npixels under the identity pose:")
print(plain)

# the three twists form a cyclic group
a, b = CornerSymmetry.TWIST_120, CornerSymmetry.TWIST_240
print(f"\ntwist_120 after twist_240 = {compose_symmetries(a, b).name}")
print(f"twist_120 after twist_120 = {compose_symmetries(a, a).name}")
