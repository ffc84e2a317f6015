"""Object pose from corner detections.

The estimator enumerates every (model corner, detection, symmetry)
pairing in a fixed order, computes a candidate pose from that single
7-point correspondence, counts how many detections the candidate explains
(one-to-one, symmetry-aware), refines the candidates that pass the inlier
gate on all their matched points, scores them, and returns the best.

Scoring is pluggable: ``reprojection`` ranks by inlier count minus a
normalized RMSE and needs no image, ``edge_ncc`` cross-correlates a line
rendering of the mesh under the candidate pose against a supplied edge
image, which separates poses the reprojection score cannot tell apart.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Optional

import numpy as np

from .corners import INDEX_MAPS, CornerDetection, CornerModel, CornerSymmetry, control_points
from .geometry import CameraIntrinsics, NonPositiveDepthError, Pose
from .mesh import (
    DEFAULT_ORTHO_TOL,
    DEFAULT_SHARP_ANGLE_TOL,
    Mesh,
    compute_diameter,
    extract_corners,
)
from .pnp import (
    DegenerateConfigurationError,
    NumericalFailureError,
    TooFewPointsError,
    pnp_dlt,
    refine_pose,
    reprojection_rmse,
)
from .render import (
    DimensionMismatchError,
    Raster,
    normalized_cross_correlation,
    render_edges,
)

__all__ = [
    "EmptyAssignmentError",
    "InlierMatch",
    "ObjectModel",
    "EstimatorConfig",
    "ScoredPose",
    "match_inliers",
    "estimate",
    "estimate_all",
    "score_reprojection",
    "score_edge_ncc",
]

SCORERS = ("reprojection", "edge_ncc")
DEFAULT_CONTROL_SCALE_FACTOR = 0.1


class EmptyAssignmentError(ValueError):
    """Scoring needs at least one matched corner."""


class InlierMatch(NamedTuple):
    corner_index: int
    detection_index: int
    symmetry: CornerSymmetry
    mean_px_error: float


@dataclass(frozen=True, eq=False)
class ObjectModel:
    """A mesh plus its corner control points and precomputed diameter."""

    mesh: Mesh
    corners: tuple
    diameter: float

    def __post_init__(self):
        if not self.corners:
            raise ValueError("object model needs at least one corner")
        object.__setattr__(self, "corners", tuple(self.corners))
        if abs(self.diameter - compute_diameter(self.mesh)) > 1e-6:
            raise ValueError("diameter does not match the mesh")

    @classmethod
    def from_mesh(
        cls,
        mesh: Mesh,
        control_scale: Optional[float] = None,
        sharp_angle_tol: float = DEFAULT_SHARP_ANGLE_TOL,
        ortho_tol: float = DEFAULT_ORTHO_TOL,
    ) -> "ObjectModel":
        """Extract corners and attach control points.

        ``control_scale`` defaults to 10% of the mesh diameter.
        """
        diameter = compute_diameter(mesh)
        scale = control_scale if control_scale is not None else DEFAULT_CONTROL_SCALE_FACTOR * diameter
        frames = extract_corners(mesh, sharp_angle_tol=sharp_angle_tol, ortho_tol=ortho_tol)
        if not frames:
            raise ValueError("mesh has no trihedral corners")
        corners = tuple(control_points(f, scale) for f in frames)
        return cls(mesh=mesh, corners=corners, diameter=diameter)

    @cached_property
    def corner_points(self) -> np.ndarray:
        """(C, 7, 3) stack of all corner control points."""
        return np.stack([c.points for c in self.corners])


@dataclass(frozen=True)
class EstimatorConfig:
    """Estimator knobs.

    ``min_inliers`` gates candidates with a strict ``count > min_inliers``
    comparison; setting ``inclusive_gate`` switches to ``>=`` so a single
    matched corner can pass with min_inliers = 1.
    """

    inlier_px_threshold: float = 8.0
    min_inliers: int = 1
    scorer: str = "reprojection"
    inclusive_gate: bool = False
    refine_max_iters: int = 50
    refine_tol: float = 1e-10

    def __post_init__(self):
        if self.inlier_px_threshold <= 0.0:
            raise ValueError("inlier_px_threshold must be positive")
        if self.min_inliers < 1:
            raise ValueError("min_inliers must be at least 1")
        if self.scorer not in SCORERS:
            raise ValueError(f"scorer must be one of {SCORERS}")


@dataclass(frozen=True, eq=False)
class ScoredPose:
    """One gated, refined, scored candidate."""

    pose: Pose
    score: float
    inlier_count: int
    assignment: tuple
    rmse: float
    hypothesis_index: int

    def __post_init__(self):
        if self.inlier_count != len(self.assignment):
            raise ValueError("inlier_count must equal the assignment length")
        corners = [m.corner_index for m in self.assignment]
        dets = [m.detection_index for m in self.assignment]
        if len(set(corners)) != len(corners) or len(set(dets)) != len(dets):
            raise ValueError("assignment must be one-to-one")


def match_inliers(
    pose: Pose,
    model: ObjectModel,
    detections,
    intrinsics: CameraIntrinsics,
    tau_px: float,
) -> tuple:
    """Greedy one-to-one corner/detection matching under a pose.

    The cost of a pair is the smallest mean pixel distance over the three
    symmetry relabelings between the corner's projected control points
    and the detection.  Pairs with cost <= tau_px are assigned greedily
    by ascending (cost, corner index, detection index).  Corners with any
    control point at non-positive depth never match.
    """
    if not detections:
        return ()
    cam = model.corner_points @ pose.rotation.T + pose.translation  # (C,7,3)
    z = cam[..., 2]
    valid = np.all(z > 1e-9, axis=1)
    uv = np.empty(cam.shape[:2] + (2,))
    safe_z = np.where(z > 1e-9, z, 1.0)
    uv[..., 0] = intrinsics.fx * cam[..., 0] / safe_z + intrinsics.cx
    uv[..., 1] = intrinsics.fy * cam[..., 1] / safe_z + intrinsics.cy

    det_pts = np.stack([d.points for d in detections])  # (D,7,2)
    permuted = det_pts[:, INDEX_MAPS]  # (D,3,7,2)
    diff = uv[:, None, None, :, :] - permuted[None, :, :, :, :]
    cost = np.linalg.norm(diff, axis=-1).mean(axis=-1)  # (C,D,3)
    best_sym = cost.argmin(axis=2)
    best_cost = cost.min(axis=2)
    best_cost[~valid, :] = np.inf

    order = [
        (best_cost[c, d], c, d)
        for c in range(best_cost.shape[0])
        for d in range(best_cost.shape[1])
        if best_cost[c, d] <= tau_px
    ]
    order.sort()
    used_c, used_d = set(), set()
    matches = []
    for cost_cd, c, d in order:
        if c in used_c or d in used_d:
            continue
        used_c.add(c)
        used_d.add(d)
        matches.append(
            InlierMatch(c, d, CornerSymmetry(int(best_sym[c, d])), float(cost_cd))
        )
    return tuple(matches)


def score_reprojection(
    pose: Pose,
    model: ObjectModel,
    detections,
    intrinsics: CameraIntrinsics,
    assignment,
    tau_px: float,
) -> float:
    """inlier count minus RMSE normalized by the inlier threshold."""
    if not assignment:
        raise EmptyAssignmentError("assignment is empty")
    mp, ip = _assignment_correspondences(model, detections, assignment)
    rmse = reprojection_rmse(pose, mp, ip, intrinsics)
    return float(len(assignment)) - rmse / tau_px


def score_edge_ncc(
    pose: Pose,
    model: ObjectModel,
    input_edges: Raster,
    intrinsics: CameraIntrinsics,
    blur: bool = False,
) -> float:
    """NCC between the supplied edge image and a rendering at ``pose``."""
    if (input_edges.width, input_edges.height) != (intrinsics.width, intrinsics.height):
        raise DimensionMismatchError(
            f"edge image is {input_edges.width}x{input_edges.height}, "
            f"camera frame is {intrinsics.width}x{intrinsics.height}"
        )
    rendered = render_edges(model.mesh, pose, intrinsics, blur=blur)
    return normalized_cross_correlation(input_edges, rendered)


def _assignment_correspondences(model, detections, assignment):
    mp = np.concatenate([model.corners[m.corner_index].points for m in assignment])
    ip = np.concatenate(
        [
            detections[m.detection_index].points[INDEX_MAPS[m.symmetry.value]]
            for m in assignment
        ]
    )
    return mp, ip


def estimate_all(
    model: ObjectModel,
    detections,
    intrinsics: CameraIntrinsics,
    config: EstimatorConfig = EstimatorConfig(),
    input_edges: Optional[Raster] = None,
) -> list:
    """All gated, refined, scored candidates in hypothesis order."""
    if config.scorer == "edge_ncc" and input_edges is None:
        raise ValueError("edge_ncc scoring needs an input edge raster")
    detections = tuple(detections)
    results = []
    hyp_index = -1
    for ci, corner in enumerate(model.corners):
        for dj, det in enumerate(detections):
            for sym in CornerSymmetry:
                hyp_index += 1
                img_pts = det.points[INDEX_MAPS[sym.value]]
                try:
                    candidate = pnp_dlt(corner.points, img_pts, intrinsics)
                    # the DLT estimate alone is too loose under pixel noise
                    # to count inliers against; polish on the same 7 points
                    candidate = refine_pose(
                        candidate,
                        corner.points,
                        img_pts,
                        intrinsics,
                        max_iters=config.refine_max_iters,
                        tol=config.refine_tol,
                    )
                except (
                    DegenerateConfigurationError,
                    TooFewPointsError,
                    NumericalFailureError,
                    NonPositiveDepthError,
                ):
                    continue
                apex_depth = float(
                    candidate.rotation[2] @ corner.apex + candidate.translation[2]
                )
                if apex_depth <= 0.0:
                    continue
                matches = match_inliers(
                    candidate, model, detections, intrinsics, config.inlier_px_threshold
                )
                count = len(matches)
                passed = (
                    count >= config.min_inliers
                    if config.inclusive_gate
                    else count > config.min_inliers
                )
                if not passed:
                    continue
                mp, ip = _assignment_correspondences(model, detections, matches)
                try:
                    refined = refine_pose(
                        candidate,
                        mp,
                        ip,
                        intrinsics,
                        max_iters=config.refine_max_iters,
                        tol=config.refine_tol,
                    )
                    rmse = reprojection_rmse(refined, mp, ip, intrinsics)
                except (NumericalFailureError, NonPositiveDepthError):
                    continue
                if config.scorer == "reprojection":
                    score = float(count) - rmse / config.inlier_px_threshold
                else:
                    score = score_edge_ncc(refined, model, input_edges, intrinsics)
                results.append(
                    ScoredPose(
                        pose=refined,
                        score=score,
                        inlier_count=count,
                        assignment=matches,
                        rmse=rmse,
                        hypothesis_index=hyp_index,
                    )
                )
    return results


def estimate(
    model: ObjectModel,
    detections,
    intrinsics: CameraIntrinsics,
    config: EstimatorConfig = EstimatorConfig(),
    input_edges: Optional[Raster] = None,
) -> Optional[ScoredPose]:
    """Best-scoring candidate, or None when nothing passes the gate.

    Ties break toward higher inlier count, then lower RMSE, then lower
    hypothesis index (the enumeration is deterministic, so the result
    is too).
    """
    best = None
    best_key = None
    for cand in estimate_all(model, detections, intrinsics, config, input_edges):
        key = (cand.score, cand.inlier_count, -cand.rmse)
        if best_key is None or key > best_key:
            best, best_key = cand, key
    return best
