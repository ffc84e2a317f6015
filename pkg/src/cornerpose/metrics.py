"""Pose-accuracy and detection metrics, plus batch aggregation.

Implements the usual model-point distance metrics:

* ADD: mean distance between corresponding model points under the
  estimated and ground-truth poses.
* ADI: mean distance from each estimated-pose point to its nearest
  ground-truth-pose point; the right choice for objects whose shape is
  invariant under some rigid transform, where ADD punishes pose answers
  that are geometrically indistinguishable from the truth.
* silhouette IoU, with "detected" meaning IoU above 0.4.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .geometry import CameraIntrinsics, Pose
from .mesh import Mesh
from .render import render_mask

__all__ = [
    "EmptyPointSetError",
    "EmptyInputError",
    "IOU_DETECTION_THRESHOLD",
    "add_metric",
    "adi_metric",
    "pose_correct",
    "detection_iou",
    "metric_points",
    "EvaluationRecord",
    "evaluate_pose",
    "GroupSummary",
    "EvaluationSummary",
    "aggregate",
    "summary_to_csv",
]

IOU_DETECTION_THRESHOLD = 0.4
MAX_METRIC_POINTS = 10000


class EmptyPointSetError(ValueError):
    """Distance metrics need at least one model point."""


class EmptyInputError(ValueError):
    """Aggregation needs at least one record."""


def add_metric(pose_est: Pose, pose_gt: Pose, points) -> float:
    """Average distance between corresponding transformed model points.

    :param pose_est: estimated pose.
    :param pose_gt: ground-truth pose.
    :param points: (N, 3) model points.
    :return: mean over points of ||est(p) - gt(p)||.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(pts) == 0:
        raise EmptyPointSetError("no model points")
    diff = pose_est.transform(pts) - pose_gt.transform(pts)
    return float(np.linalg.norm(diff, axis=1).mean())


def adi_metric(pose_est: Pose, pose_gt: Pose, points) -> float:
    """Average distance to the nearest transformed model point.

    :param points: (N, 3) model points.
    :return: mean over points p of min over points q of
        ||est(p) - gt(q)||.  Computed with a KD-tree; exact, matches the
        brute-force double loop.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(pts) == 0:
        raise EmptyPointSetError("no model points")
    est = pose_est.transform(pts)
    gt = pose_gt.transform(pts)
    dist, _ = cKDTree(gt).query(est, k=1)
    return float(np.mean(dist))


def pose_correct(add_value: float, diameter: float, k_percent: float) -> bool:
    """Strict threshold test: add_value < (k_percent / 100) * diameter."""
    if diameter <= 0.0:
        raise ValueError("diameter must be positive")
    return bool(add_value < (k_percent / 100.0) * diameter)


def detection_iou(mesh: Mesh, pose_est: Pose, pose_gt: Pose, intrinsics: CameraIntrinsics) -> float:
    """Silhouette intersection-over-union of the two rendered masks.

    Returns 0.0 when the union is empty (both silhouettes off-frame).
    """
    est = render_mask(mesh, pose_est, intrinsics).values > 0.5
    gt = render_mask(mesh, pose_gt, intrinsics).values > 0.5
    union = int(np.logical_or(est, gt).sum())
    if union == 0:
        return 0.0
    inter = int(np.logical_and(est, gt).sum())
    return inter / union


def metric_points(mesh: Mesh, max_points: int = MAX_METRIC_POINTS, seed: int = 0) -> np.ndarray:
    """Vertex set used by the distance metrics.

    All vertices when the mesh has at most ``max_points``, otherwise a
    seeded uniform subsample of that size.
    """
    pts = mesh.vertices
    if len(pts) == 0:
        raise EmptyPointSetError("mesh has no vertices")
    if len(pts) <= max_points:
        return pts
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, 3], dtype=np.uint64)))
    idx = rng.choice(len(pts), size=max_points, replace=False)
    return pts[np.sort(idx)]


@dataclass(frozen=True)
class EvaluationRecord:
    """Metrics of one scenario.

    ``add`` holds the ADD or ADI value depending on the symmetric flag
    used at evaluation time; ``add_rel`` is that value over the model
    diameter.  ``correct_k`` and ``detected`` are derived and validated:
    correct_k == (add_rel < k/100), detected == (iou > 0.4).
    """

    add: float
    add_rel: float
    correct_10: bool
    correct_20: bool
    correct_30: bool
    iou: float
    detected: bool

    def __post_init__(self):
        for k, flag in ((10, self.correct_10), (20, self.correct_20), (30, self.correct_30)):
            if flag != (self.add_rel < k / 100.0):
                raise ValueError(f"correct_{k} inconsistent with add_rel")
        if self.detected != (self.iou > IOU_DETECTION_THRESHOLD):
            raise ValueError("detected inconsistent with iou")


def evaluate_pose(
    mesh: Mesh,
    diameter: float,
    pose_est: Optional[Pose],
    pose_gt: Pose,
    intrinsics: CameraIntrinsics,
    symmetric: bool = False,
    points=None,
) -> EvaluationRecord:
    """Build the EvaluationRecord for one scenario.

    :param pose_est: estimated pose, or None for a failed estimate
        (scored as add = inf, iou = 0).
    :param symmetric: use ADI instead of ADD.
    :param points: metric point set; defaults to ``metric_points(mesh)``.
    """
    if pose_est is None:
        return EvaluationRecord(
            add=math.inf,
            add_rel=math.inf,
            correct_10=False,
            correct_20=False,
            correct_30=False,
            iou=0.0,
            detected=False,
        )
    pts = metric_points(mesh) if points is None else np.asarray(points, dtype=float)
    metric = adi_metric if symmetric else add_metric
    add = metric(pose_est, pose_gt, pts)
    iou = detection_iou(mesh, pose_est, pose_gt, intrinsics)
    rel = add / diameter
    return EvaluationRecord(
        add=add,
        add_rel=rel,
        correct_10=pose_correct(add, diameter, 10.0),
        correct_20=pose_correct(add, diameter, 20.0),
        correct_30=pose_correct(add, diameter, 30.0),
        iou=iou,
        detected=iou > IOU_DETECTION_THRESHOLD,
    )


@dataclass(frozen=True)
class GroupSummary:
    """Percentages for one scenario group."""

    group: str
    count: int
    add10: float
    add20: float
    add30: float
    detection: float
    add10_given_detected: Optional[float]
    add20_given_detected: Optional[float]
    add30_given_detected: Optional[float]


@dataclass(frozen=True)
class EvaluationSummary:
    """Per-group percentages plus cross-group mean and population std."""

    groups: tuple
    mean: tuple  # (add10, add20, add30, detection)
    std: tuple


def _pct(flags) -> float:
    return 100.0 * float(np.mean([1.0 if f else 0.0 for f in flags]))


def aggregate(groups) -> EvaluationSummary:
    """Summarize records per group.

    :param groups: mapping of group id -> sequence of EvaluationRecord.
    :return: EvaluationSummary with one GroupSummary per group (input
        order preserved) and the across-group mean and population
        standard deviation of each percentage column.
    :raises EmptyInputError: when there are no groups or a group is
        empty.
    """
    if not groups:
        raise EmptyInputError("no groups to aggregate")
    rows = []
    for name, records in groups.items():
        records = list(records)
        if not records:
            raise EmptyInputError(f"group {name!r} has no records")
        detected = [r for r in records if r.detected]
        rows.append(
            GroupSummary(
                group=str(name),
                count=len(records),
                add10=_pct([r.correct_10 for r in records]),
                add20=_pct([r.correct_20 for r in records]),
                add30=_pct([r.correct_30 for r in records]),
                detection=_pct([r.detected for r in records]),
                add10_given_detected=_pct([r.correct_10 for r in detected]) if detected else None,
                add20_given_detected=_pct([r.correct_20 for r in detected]) if detected else None,
                add30_given_detected=_pct([r.correct_30 for r in detected]) if detected else None,
            )
        )
    columns = np.array([[g.add10, g.add20, g.add30, g.detection] for g in rows])
    mean = tuple(float(v) for v in columns.mean(axis=0))
    std = tuple(float(v) for v in columns.std(axis=0))  # population std
    return EvaluationSummary(groups=tuple(rows), mean=mean, std=std)


def summary_to_csv(summary: EvaluationSummary) -> str:
    """CSV with columns (group, add10, add20, add30, detection) and a
    final ``average`` row formatted mean(+/-std)."""
    lines = ["group,add10,add20,add30,detection"]
    for g in summary.groups:
        lines.append(
            f"{g.group},{g.add10:.1f},{g.add20:.1f},{g.add30:.1f},{g.detection:.1f}"
        )
    cells = [
        f"{m:.1f}(+/-{s:.1f})" for m, s in zip(summary.mean, summary.std)
    ]
    lines.append("average," + ",".join(cells))
    return "\n".join(lines) + "\n"
