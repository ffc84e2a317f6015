"""Seven-point corner representation and its threefold viewing ambiguity.

A trihedral corner is summarized by 7 virtual control points: the apex at
index 0, then a +/- pair along each of the three edge directions:

    index 0      apex
    index 1, 2   apex +/- s * axes[0]
    index 3, 4   apex +/- s * axes[1]
    index 5, 6   apex +/- s * axes[2]

Because the three edges of a near-orthogonal corner look alike, a detector
cannot tell which image pair belongs to which axis: rotating the corner by
120 or 240 degrees about its diagonal (the axes-sum direction) relabels the
pairs cyclically while the apex stays put.  That ambiguity is represented
twice here, and the two views must stay consistent:

* as an index permutation applied to a detection's 2D points
  (`apply_symmetry`), and
* as the 3D rotation about the diagonal that produces the same relabeling
  for the canonical corner (`symmetry_rotation`).
"""

import enum
from dataclasses import dataclass

import numpy as np

from .geometry import nearest_rotation, rotation_from_vector
from .mesh import CornerFrame

__all__ = [
    "NonPositiveScaleError",
    "CornerSymmetry",
    "CornerModel",
    "CornerDetection",
    "control_points",
    "apply_symmetry",
    "compose_symmetries",
    "symmetry_rotation",
    "model_to_dict",
    "model_from_dict",
    "detection_to_dict",
    "detection_from_dict",
]

_PAIR_ORTHO_TOL = 1e-6
_PAIR_MIRROR_TOL = 1e-9


class NonPositiveScaleError(ValueError):
    """Control-point scale must be strictly positive."""


class CornerSymmetry(enum.Enum):
    """The three indistinguishable labelings of a corner detection.

    The member value is the number of 120-degree twists about the corner
    diagonal.
    """

    IDENTITY = 0
    TWIST_120 = 1
    TWIST_240 = 2

    @property
    def json_name(self) -> str:
        return _JSON_NAMES[self]


_JSON_NAMES = {
    CornerSymmetry.IDENTITY: "identity",
    CornerSymmetry.TWIST_120: "twist_120",
    CornerSymmetry.TWIST_240: "twist_240",
}
_FROM_JSON = {v: k for k, v in _JSON_NAMES.items()}

# Gather maps: permuted[i] = original[INDEX_MAPS[sym][i]].  Derived from the
# +120deg rotation about (1,1,1)/sqrt(3), which sends e1->e2->e3: the points
# that were detected for axis pair (3,4) are where pair (1,2) now projects.
INDEX_MAPS = np.array(
    [
        [0, 1, 2, 3, 4, 5, 6],
        [0, 3, 4, 5, 6, 1, 2],
        [0, 5, 6, 1, 2, 3, 4],
    ],
    dtype=np.int64,
)


@dataclass(frozen=True, eq=False)
class CornerModel:
    """The 7 virtual 3D control points of one corner, plus their scale."""

    points: np.ndarray
    scale: float

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).reshape(7, 3)
        if not np.all(np.isfinite(pts)):
            raise ValueError("control points contain non-finite values")
        if self.scale <= 0.0:
            raise NonPositiveScaleError("scale must be positive")
        apex = pts[0]
        diffs = pts[1::2] - apex  # the + end of each axis pair
        norms = np.linalg.norm(diffs, axis=1)
        if np.any(np.abs(norms - self.scale) > _PAIR_MIRROR_TOL + 1e-6 * self.scale):
            raise ValueError("axis points must sit at distance scale from the apex")
        mirrored = 2.0 * apex - pts[1::2]
        if float(np.abs(mirrored - pts[2::2]).max()) > _PAIR_MIRROR_TOL * max(1.0, self.scale):
            raise ValueError("each even point must mirror the preceding odd point")
        unit = diffs / norms[:, None]
        for i in range(3):
            for j in range(i + 1, 3):
                if abs(float(unit[i] @ unit[j])) > _PAIR_ORTHO_TOL:
                    raise ValueError("axis directions must be pairwise orthogonal")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def apex(self) -> np.ndarray:
        return self.points[0]

    @property
    def axes(self) -> np.ndarray:
        """Unit axis directions, one per row."""
        return (self.points[1::2] - self.points[0]) / self.scale

    @property
    def diagonal(self) -> np.ndarray:
        """Unit vector along the corner diagonal (sum of the axes)."""
        d = self.axes.sum(axis=0)
        return d / np.linalg.norm(d)


@dataclass(frozen=True, eq=False)
class CornerDetection:
    """Seven detected 2D points (pixel coordinates) and a confidence."""

    points: np.ndarray
    confidence: float = 1.0

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).reshape(7, 2)
        if not np.all(np.isfinite(pts)):
            raise ValueError("detection points contain non-finite values")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must lie in [0, 1]")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)


def control_points(frame: CornerFrame, scale: float) -> CornerModel:
    """Lay out the 7 control points for a corner frame.

    The frame axes are projected to the nearest exactly-orthonormal
    right-handed triple first (extracted frames are only orthogonal to
    the extraction tolerance).  Raises NonPositiveScaleError for
    scale <= 0.
    """
    if scale <= 0.0:
        raise NonPositiveScaleError("scale must be positive")
    axes = nearest_rotation(frame.axes)
    apex = np.asarray(frame.apex, dtype=float)
    pts = np.empty((7, 3))
    pts[0] = apex
    for k in range(3):
        pts[1 + 2 * k] = apex + scale * axes[k]
        pts[2 + 2 * k] = apex - scale * axes[k]
    return CornerModel(points=pts, scale=float(scale))


def apply_symmetry(sym: CornerSymmetry, detection: CornerDetection) -> CornerDetection:
    """Relabel a detection's points under one of the three symmetries."""
    return CornerDetection(
        points=detection.points[INDEX_MAPS[sym.value]],
        confidence=detection.confidence,
    )


def compose_symmetries(a: CornerSymmetry, b: CornerSymmetry) -> CornerSymmetry:
    """Symmetry equivalent to applying ``b`` first, then ``a``."""
    return CornerSymmetry((a.value + b.value) % 3)


def symmetry_rotation(sym: CornerSymmetry) -> np.ndarray:
    """3D rotation realizing ``sym`` on the canonical corner.

    The canonical corner has apex at the origin and axes e1, e2, e3; the
    returned matrix rotates by 0/120/240 degrees about (1,1,1)/sqrt(3).
    """
    axis = np.ones(3) / np.sqrt(3.0)
    angle = sym.value * 2.0 * np.pi / 3.0
    return rotation_from_vector(axis * angle)


def model_to_dict(model: CornerModel) -> dict:
    return {
        "points": [[float(v) for v in p] for p in model.points],
        "scale": float(model.scale),
    }


def model_from_dict(data: dict) -> CornerModel:
    return CornerModel(
        points=np.asarray(data["points"], dtype=float),
        scale=float(data["scale"]),
    )


def detection_to_dict(det: CornerDetection) -> dict:
    return {
        "points": [[float(v) for v in p] for p in det.points],
        "confidence": float(det.confidence),
    }


def detection_from_dict(data: dict) -> CornerDetection:
    return CornerDetection(
        points=np.asarray(data["points"], dtype=float),
        confidence=float(data.get("confidence", 1.0)),
    )
