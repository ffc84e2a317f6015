"""Pose from 3D-2D correspondences: DLT initialization + damped refinement.

Correspondences are passed as parallel arrays, ``model_points`` (N, 3) in
the object frame and ``image_points`` (N, 2) in pixels.  A small
Correspondence record plus ``stack_correspondences`` is provided for
callers that prefer explicit pairs.
"""

import math
from typing import NamedTuple

import numpy as np

from .geometry import (
    CameraIntrinsics,
    NonPositiveDepthError,
    Pose,
    nearest_rotation,
    project,
    rotation_from_vector,
)

__all__ = [
    "TooFewPointsError",
    "DegenerateConfigurationError",
    "NumericalFailureError",
    "Correspondence",
    "stack_correspondences",
    "pnp_dlt",
    "refine_pose",
    "reprojection_residuals",
    "reprojection_rmse",
    "reprojection_jacobian",
]

_RANK_RATIO = 1e-10
_MAX_DAMPING = 1e15


class TooFewPointsError(ValueError):
    """Not enough correspondences for the requested operation."""


class DegenerateConfigurationError(ValueError):
    """The correspondences do not determine a unique pose."""


class NumericalFailureError(RuntimeError):
    """Refinement could not make numerical progress."""


class Correspondence(NamedTuple):
    model_point: np.ndarray
    image_point: np.ndarray


def stack_correspondences(corrs):
    """Split a sequence of Correspondence into (N,3) and (N,2) arrays."""
    mp = np.asarray([c.model_point for c in corrs], dtype=float)
    ip = np.asarray([c.image_point for c in corrs], dtype=float)
    return mp, ip


def _check_inputs(model_points, image_points, minimum):
    mp = np.asarray(model_points, dtype=float).reshape(-1, 3)
    ip = np.asarray(image_points, dtype=float).reshape(-1, 2)
    if len(mp) != len(ip):
        raise ValueError("model and image point counts differ")
    if len(mp) < minimum:
        raise TooFewPointsError(f"need at least {minimum} correspondences, got {len(mp)}")
    return mp, ip


def _normalize_2d(points):
    centroid = points.mean(axis=0)
    shifted = points - centroid
    mean_dist = float(np.linalg.norm(shifted, axis=1).mean())
    s = math.sqrt(2.0) / mean_dist if mean_dist > 1e-12 else 1.0
    t = np.array([[s, 0.0, -s * centroid[0]], [0.0, s, -s * centroid[1]], [0.0, 0.0, 1.0]])
    return t, shifted * s


def _normalize_3d(points):
    centroid = points.mean(axis=0)
    shifted = points - centroid
    mean_dist = float(np.linalg.norm(shifted, axis=1).mean())
    s = math.sqrt(3.0) / mean_dist if mean_dist > 1e-12 else 1.0
    t = np.eye(4)
    t[:3, :3] *= s
    t[:3, 3] = -s * centroid
    return t, shifted * s


def pnp_dlt(model_points, image_points, intrinsics: CameraIntrinsics) -> Pose:
    """Linear pose estimate from >= 6 correspondences.

    Pixels are first mapped through the inverse intrinsics, both point
    sets are Hartley-normalized, and the 3x4 projection is solved as the
    null vector of the stacked DLT system.  The rotation block is
    projected to the nearest rotation, with the overall sign chosen so
    the model centroid sits at positive depth.

    Raises TooFewPointsError for fewer than 6 points and
    DegenerateConfigurationError when the system is rank-deficient
    (e.g. coplanar points).
    """
    mp, ip = _check_inputs(model_points, image_points, 6)
    kinv = np.linalg.inv(intrinsics.matrix())
    ones = np.ones((len(ip), 1))
    norm_px = (np.hstack([ip, ones]) @ kinv.T)[:, :2]

    t2, p2 = _normalize_2d(norm_px)
    t3, p3 = _normalize_3d(mp)

    n = len(mp)
    x_h = np.hstack([p3, np.ones((n, 1))])
    design = np.zeros((2 * n, 12))
    design[0::2, 0:4] = x_h
    design[0::2, 8:12] = -p2[:, 0:1] * x_h
    design[1::2, 4:8] = x_h
    design[1::2, 8:12] = -p2[:, 1:2] * x_h

    _, svals, vt = np.linalg.svd(design)
    if not np.all(np.isfinite(svals)) or svals[0] <= 0.0:
        raise DegenerateConfigurationError("invalid DLT system")
    # uniqueness requires rank 11: the second-smallest singular value
    # must be well above the noise floor
    if svals[10] / svals[0] < _RANK_RATIO:
        raise DegenerateConfigurationError("rank-deficient correspondences")
    p_norm = vt[-1].reshape(3, 4)
    a = np.linalg.inv(t2) @ p_norm @ t3

    centroid_h = np.append(mp.mean(axis=0), 1.0)
    if float(a[2] @ centroid_h) < 0.0:
        a = -a
    b = a[:, :3]
    svals_b = np.linalg.svd(b, compute_uv=False)
    scale = float(svals_b.mean())
    if scale < 1e-15:
        raise DegenerateConfigurationError("vanishing rotation block")
    r = nearest_rotation(b)
    t = a[:, 3] / scale
    return Pose(r, t)


def reprojection_residuals(pose: Pose, model_points, image_points, intrinsics) -> np.ndarray:
    """Stacked (2N,) residual vector: projected minus observed pixels."""
    mp, ip = _check_inputs(model_points, image_points, 1)
    return (project(intrinsics, pose, mp) - ip).reshape(-1)


def reprojection_rmse(pose: Pose, model_points, image_points, intrinsics) -> float:
    """Root of the mean squared 2D reprojection error per point."""
    mp, ip = _check_inputs(model_points, image_points, 1)
    res = project(intrinsics, pose, mp) - ip
    return float(np.sqrt((res * res).sum(axis=1).mean()))


def _jacobian_from_cam(cam, translation, intrinsics) -> np.ndarray:
    """Jacobian given precomputed camera-frame points (no depth check)."""
    z = cam[:, 2]
    rm = cam - translation
    n = len(cam)
    jac = np.zeros((2 * n, 6))
    # d(cam)/dw = -[R m]x, d(cam)/dt = I; chain with the pinhole derivative
    du = np.zeros((n, 3))
    du[:, 0] = intrinsics.fx / z
    du[:, 2] = -intrinsics.fx * cam[:, 0] / (z * z)
    dv = np.zeros((n, 3))
    dv[:, 1] = intrinsics.fy / z
    dv[:, 2] = -intrinsics.fy * cam[:, 1] / (z * z)
    skew = np.zeros((n, 3, 3))
    skew[:, 0, 1] = -rm[:, 2]
    skew[:, 0, 2] = rm[:, 1]
    skew[:, 1, 0] = rm[:, 2]
    skew[:, 1, 2] = -rm[:, 0]
    skew[:, 2, 0] = -rm[:, 1]
    skew[:, 2, 1] = rm[:, 0]
    jac[0::2, :3] = -np.einsum("nk,nkj->nj", du, skew)
    jac[1::2, :3] = -np.einsum("nk,nkj->nj", dv, skew)
    jac[0::2, 3:] = du
    jac[1::2, 3:] = dv
    return jac


def reprojection_jacobian(pose: Pose, model_points, intrinsics) -> np.ndarray:
    """(2N, 6) Jacobian of the residuals w.r.t. (wx, wy, wz, tx, ty, tz).

    The rotation increment is a left-multiplied exponential map:
    the perturbed camera point is exp([w]x) (R m) + t + dt.
    """
    mp = np.asarray(model_points, dtype=float).reshape(-1, 3)
    cam = pose.transform(mp)
    if np.any(cam[:, 2] <= 1e-9):
        raise NonPositiveDepthError("point at or behind the camera plane")
    return _jacobian_from_cam(cam, pose.translation, intrinsics)


def refine_pose(
    initial: Pose,
    model_points,
    image_points,
    intrinsics: CameraIntrinsics,
    max_iters: int = 50,
    tol: float = 1e-10,
) -> Pose:
    """Damped Gauss-Newton refinement of a pose.

    Steps that fail to reduce the squared reprojection error raise the
    damping and are retried; the returned pose never has a larger error
    than ``initial``.  Terminates when the step norm drops below ``tol``
    or the iteration budget runs out.  Raises NumericalFailureError when
    no solvable system exists even at maximum damping.
    """
    mp, ip = _check_inputs(model_points, image_points, 4)
    fx, fy = intrinsics.fx, intrinsics.fy
    cx, cy = intrinsics.cx, intrinsics.cy
    eye6 = np.eye(6)

    def evaluate(r, t):
        """(sse, residuals, cam points); inf sse when a depth is bad."""
        cam = mp @ r.T + t
        z = cam[:, 2]
        if np.any(z <= 1e-9):
            return math.inf, None, None
        res = np.empty(2 * len(mp))
        res[0::2] = fx * cam[:, 0] / z + cx - ip[:, 0]
        res[1::2] = fy * cam[:, 1] / z + cy - ip[:, 1]
        value = float(res @ res)
        if not math.isfinite(value):
            return math.inf, None, None
        return value, res, cam

    r_cur = np.array(initial.rotation, dtype=float)
    t_cur = np.array(initial.translation, dtype=float)
    best, res, cam = evaluate(r_cur, t_cur)
    if not math.isfinite(best):
        raise NumericalFailureError("initial pose puts points behind the camera")

    def finish():
        # pose state stays a raw array product chain during the loop;
        # drift over <= max_iters products is far below the Pose tolerance
        if not changed:
            return initial
        try:
            return Pose(r_cur, t_cur)
        except ValueError:
            return Pose(nearest_rotation(r_cur), t_cur)

    changed = False
    damping = 1e-6
    for _ in range(max_iters):
        jac = _jacobian_from_cam(cam, t_cur, intrinsics)
        grad = jac.T @ res
        hess = jac.T @ jac
        accepted = False
        while True:
            try:
                delta = np.linalg.solve(hess + damping * eye6, -grad)
            except np.linalg.LinAlgError:
                delta = None
            if delta is None or not np.all(np.isfinite(delta)):
                damping *= 10.0
                if damping > _MAX_DAMPING:
                    raise NumericalFailureError("normal equations unsolvable")
                continue
            if float(np.linalg.norm(delta)) < tol:
                return finish()  # converged; keep the pose unchanged
            r_cand = rotation_from_vector(delta[:3]) @ r_cur
            t_cand = t_cur + delta[3:]
            cand_sse, cand_res, cand_cam = evaluate(r_cand, t_cand)
            if cand_sse <= best:
                r_cur, t_cur = r_cand, t_cand
                best, res, cam = cand_sse, cand_res, cand_cam
                damping = max(damping / 3.0, 1e-12)
                accepted = True
                changed = True
                break
            damping *= 10.0
            if damping > _MAX_DAMPING:
                return finish()  # damped out, no descent direction left
        if not accepted:
            break
    return finish()
