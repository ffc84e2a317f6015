"""Pinhole camera geometry and rigid-body poses.

Coordinate conventions used throughout the package:

* Object points are ``(..., 3)`` float arrays in object units (whatever
  unit the mesh file uses).
* The camera frame is right-handed: x right, y down, z forward along the
  optical axis.  A pose maps object coordinates into this frame.
* Image coordinates ``(u, v)`` are in pixels, u to the right, v down,
  ``(0, 0)`` at the center of the top-left pixel.
"""

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "NonPositiveDepthError",
    "Pose",
    "CameraIntrinsics",
    "compose",
    "project",
    "rotation_geodesic_distance",
    "nearest_rotation",
    "rotation_from_vector",
    "pose_to_dict",
    "pose_from_dict",
    "intrinsics_to_dict",
    "intrinsics_from_dict",
]

MIN_DEPTH = 1e-9
ORTHONORMAL_TOL = 1e-9


class NonPositiveDepthError(ValueError):
    """A point sits at or behind the camera plane (z <= MIN_DEPTH)."""


def _readonly(values, shape, name):
    arr = np.array(values, dtype=float)
    if arr.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    arr.setflags(write=False)
    return arr


def nearest_rotation(m) -> np.ndarray:
    """Closest rotation matrix to ``m`` in the Frobenius sense.

    Polar factor via SVD, with the sign of the last singular vector
    flipped when needed so the determinant is +1.
    """
    m = np.asarray(m, dtype=float)
    u, _, vt = np.linalg.svd(m)
    r = u @ vt
    if np.linalg.det(r) < 0.0:
        u = u.copy()
        u[:, -1] = -u[:, -1]
        r = u @ vt
    return r


def rotation_from_vector(w) -> np.ndarray:
    """Rotation matrix for an axis-angle vector (exponential map).

    ``w`` has the rotation axis as direction and the angle in radians as
    norm.  Small angles use the second-order series to stay stable.
    """
    w = np.asarray(w, dtype=float).reshape(3)
    theta = float(np.linalg.norm(w))
    k = np.array(
        [[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]]
    )
    if theta < 1e-9:
        return np.eye(3) + k + 0.5 * (k @ k)
    a = math.sin(theta) / theta
    b = (1.0 - math.cos(theta)) / (theta * theta)
    return np.eye(3) + a * k + b * (k @ k)


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform from the object frame into the camera frame.

    ``rotation`` is a proper orthonormal 3x3 matrix (validated to 1e-9),
    ``translation`` a 3-vector.  Camera point = R @ p + t.
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = _readonly(self.rotation, (3, 3), "rotation")
        t = _readonly(self.translation, (3,), "translation")
        drift = float(np.abs(r.T @ r - np.eye(3)).max())
        if drift > ORTHONORMAL_TOL:
            raise ValueError(f"rotation is not orthonormal (drift {drift:.3e})")
        if abs(float(np.linalg.det(r)) - 1.0) > ORTHONORMAL_TOL:
            raise ValueError("rotation determinant is not +1")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    def transform(self, points) -> np.ndarray:
        """Map object points (..., 3) into the camera frame."""
        pts = np.asarray(points, dtype=float)
        return pts @ self.rotation.T + self.translation

    def inverse(self) -> "Pose":
        rt = self.rotation.T
        return Pose(rt, -rt @ self.translation)

    def compose(self, other: "Pose") -> "Pose":
        """Pose applying ``other`` first, then ``self``."""
        r = self.rotation @ other.rotation
        drift = float(np.abs(r.T @ r - np.eye(3)).max())
        if drift > ORTHONORMAL_TOL:
            r = nearest_rotation(r)
        t = self.rotation @ other.translation + self.translation
        return Pose(r, t)

    def matrix(self) -> np.ndarray:
        """4x4 homogeneous matrix."""
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m


def compose(a: Pose, b: Pose) -> Pose:
    """Pose equivalent to applying ``b`` first, then ``a``."""
    return a.compose(b)


def rotation_geodesic_distance(a, b) -> float:
    """Geodesic angle in radians between two rotations.

    Accepts Pose objects or bare 3x3 matrices.  Uses the trace formula
    with the cosine clamped into [-1, 1] against rounding.
    """
    ra = a.rotation if isinstance(a, Pose) else np.asarray(a, dtype=float)
    rb = b.rotation if isinstance(b, Pose) else np.asarray(b, dtype=float)
    c = (float(np.trace(ra.T @ rb)) - 1.0) / 2.0
    return math.acos(min(1.0, max(-1.0, c)))


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics plus the target frame size in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0.0 or self.fy <= 0.0:
            raise ValueError("focal lengths must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("frame size must be at least 1x1")

    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )


def project(intrinsics: CameraIntrinsics, pose: Pose, points) -> np.ndarray:
    """Project object points to pixel coordinates.

    ``points`` may be a single (3,) point or an (N, 3) array; the result
    has the matching shape with the last axis of size 2.  Raises
    NonPositiveDepthError if any point lands at z <= 1e-9.
    """
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    cam = pose.transform(pts.reshape(-1, 3))
    z = cam[:, 2]
    if np.any(z <= MIN_DEPTH):
        raise NonPositiveDepthError("point at or behind the camera plane")
    uv = np.empty((cam.shape[0], 2))
    uv[:, 0] = intrinsics.fx * cam[:, 0] / z + intrinsics.cx
    uv[:, 1] = intrinsics.fy * cam[:, 1] / z + intrinsics.cy
    return uv[0] if single else uv


def pose_to_dict(pose: Pose) -> dict:
    """JSON-ready dict: {"R": [9 row-major floats], "t": [3 floats]}."""
    return {
        "R": [float(v) for v in pose.rotation.reshape(9)],
        "t": [float(v) for v in pose.translation],
    }


def pose_from_dict(data: dict) -> Pose:
    r = np.asarray(data["R"], dtype=float).reshape(3, 3)
    t = np.asarray(data["t"], dtype=float)
    return Pose(r, t)


def intrinsics_to_dict(k: CameraIntrinsics) -> dict:
    return {
        "fx": k.fx,
        "fy": k.fy,
        "cx": k.cx,
        "cy": k.cy,
        "width": k.width,
        "height": k.height,
    }


def intrinsics_from_dict(data: dict) -> CameraIntrinsics:
    return CameraIntrinsics(
        fx=float(data["fx"]),
        fy=float(data["fy"]),
        cx=float(data["cx"]),
        cy=float(data["cy"]),
        width=int(data["width"]),
        height=int(data["height"]),
    )
