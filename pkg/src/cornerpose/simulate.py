"""Deterministic synthetic corner detections for benchmarking.

All randomness flows through Philox (a named 64-bit counter-based
generator) keyed by ``(seed, stream)``, so a scenario is reproducible
from its integer seed alone.  Stream ids:

    0   free for callers
    1   ground-truth pose sampling
    2   detection simulation

Draw order inside ``simulate_detections`` is fixed and documented on the
function so reimplementations can match it exactly.
"""

import json
from dataclasses import dataclass

import numpy as np

from .corners import CornerDetection, CornerSymmetry, apply_symmetry, detection_from_dict, detection_to_dict
from .estimator import ObjectModel
from .geometry import (
    CameraIntrinsics,
    Pose,
    intrinsics_from_dict,
    intrinsics_to_dict,
    pose_from_dict,
    pose_to_dict,
)

__all__ = [
    "POSE_STREAM",
    "DETECTION_STREAM",
    "make_rng",
    "scenario_seed",
    "NoiseModel",
    "Scenario",
    "random_rotation",
    "sample_pose",
    "visible_corner_indices",
    "simulate_detections",
    "sample_scenario",
    "scenario_to_dict",
    "scenario_from_dict",
    "write_scenarios",
    "read_scenarios",
]

POSE_STREAM = 1
DETECTION_STREAM = 2
_MASK64 = (1 << 64) - 1

PERMUTATION_MODES = ("uniform_random", "identity_only")


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Philox generator keyed by (seed, stream)."""
    key = np.array([seed & _MASK64, stream & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def scenario_seed(base_seed: int, index: int) -> int:
    """Per-scenario seed derived from a batch seed (LCG-style mix)."""
    return (base_seed * 6364136223846793005 + index * 1442695040888963407) & ((1 << 63) - 1)


@dataclass(frozen=True)
class NoiseModel:
    """Detection corruption parameters.

    ``outlier_rate`` is the target fraction of the final detection set
    that is clutter: round(rate * n_true / (1 - rate)) extra random
    detections are appended after the true ones.
    ``clutter_corner_count`` adds that many further clutter detections
    unconditionally.
    """

    pixel_sigma: float = 1.0
    outlier_rate: float = 0.0
    miss_rate: float = 0.0
    permutation_flip: str = "uniform_random"
    clutter_corner_count: int = 0

    def __post_init__(self):
        if self.pixel_sigma < 0.0:
            raise ValueError("pixel_sigma must be non-negative")
        if not 0.0 <= self.outlier_rate <= 1.0:
            raise ValueError("outlier_rate must lie in [0, 1]")
        if not 0.0 <= self.miss_rate <= 1.0:
            raise ValueError("miss_rate must lie in [0, 1]")
        if self.permutation_flip not in PERMUTATION_MODES:
            raise ValueError(f"permutation_flip must be one of {PERMUTATION_MODES}")
        if self.clutter_corner_count < 0:
            raise ValueError("clutter_corner_count must be non-negative")


@dataclass(frozen=True, eq=False)
class Scenario:
    """One evaluation case: ground truth plus the detections given to the
    estimator."""

    model_id: str
    gt_pose: Pose
    intrinsics: CameraIntrinsics
    detections: tuple
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "detections", tuple(self.detections))


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform random rotation via a normalized 4-normal quaternion."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def sample_pose(
    rng: np.random.Generator,
    model: ObjectModel,
    intrinsics: CameraIntrinsics,
    depth_range=(4.0, 8.0),
) -> Pose:
    """Random pose with the object centroid inside the central frame area.

    Depth is uniform in ``depth_range`` times the model diameter.  Draw
    order: rotation quaternion (4 normals), depth, u, v.
    """
    r = random_rotation(rng)
    z = rng.uniform(*depth_range) * model.diameter
    u = rng.uniform(0.3, 0.7) * intrinsics.width
    v = rng.uniform(0.3, 0.7) * intrinsics.height
    center_cam = np.array(
        [(u - intrinsics.cx) / intrinsics.fx * z, (v - intrinsics.cy) / intrinsics.fy * z, z]
    )
    centroid = model.mesh.vertices.mean(axis=0)
    return Pose(r, center_cam - r @ centroid)


def visible_corner_indices(model: ObjectModel, pose: Pose, intrinsics: CameraIntrinsics):
    """Corners with all 7 control points in frame and a front-facing apex.

    Front-facing: the corner diagonal (axes sum, pointing into the
    object) makes a positive dot product with the viewing ray through
    the apex, i.e. the open side of the corner faces the camera.
    """
    out = []
    for ci, corner in enumerate(model.corners):
        cam = pose.transform(corner.points)
        if np.any(cam[:, 2] <= 1e-9):
            continue
        u = intrinsics.fx * cam[:, 0] / cam[:, 2] + intrinsics.cx
        v = intrinsics.fy * cam[:, 1] / cam[:, 2] + intrinsics.cy
        if u.min() < 0.0 or u.max() > intrinsics.width - 1:
            continue
        if v.min() < 0.0 or v.max() > intrinsics.height - 1:
            continue
        apex_cam = cam[0]
        ray = apex_cam / np.linalg.norm(apex_cam)
        diag_cam = pose.rotation @ corner.diagonal
        if float(diag_cam @ ray) <= 0.0:
            continue
        out.append(ci)
    return out


def simulate_detections(
    model: ObjectModel,
    gt_pose: Pose,
    intrinsics: CameraIntrinsics,
    noise: NoiseModel,
    seed: int,
) -> tuple:
    """Noisy detections of the visible corners plus clutter.

    Deterministic given ``seed``: uses Philox stream DETECTION_STREAM.
    Draw order: per visible corner (model order) one uniform for the
    miss test, then a (7, 2) standard-normal block for pixel noise, then
    (in uniform_random mode) one integer in [0, 3) choosing the
    relabeling; afterwards each clutter detection draws a (7, 2) uniform
    block over the frame.  Noise blocks are drawn even for missed
    corners so the stream position does not depend on outcomes.
    """
    rng = make_rng(seed, DETECTION_STREAM)
    detections = []
    n_true = 0
    for ci in visible_corner_indices(model, gt_pose, intrinsics):
        corner = model.corners[ci]
        cam = gt_pose.transform(corner.points)
        uv = np.empty((7, 2))
        uv[:, 0] = intrinsics.fx * cam[:, 0] / cam[:, 2] + intrinsics.cx
        uv[:, 1] = intrinsics.fy * cam[:, 1] / cam[:, 2] + intrinsics.cy
        miss_draw = rng.uniform()
        noise_block = rng.normal(size=(7, 2))
        if noise.permutation_flip == "uniform_random":
            sym = CornerSymmetry(int(rng.integers(3)))
        else:
            sym = CornerSymmetry.IDENTITY
        if miss_draw < noise.miss_rate:
            continue
        noisy = uv + noise.pixel_sigma * noise_block
        detections.append(apply_symmetry(sym, CornerDetection(points=noisy)))
        n_true += 1
    n_extra = 0
    if noise.outlier_rate > 0.0 and noise.outlier_rate < 1.0:
        n_extra = int(round(noise.outlier_rate * n_true / (1.0 - noise.outlier_rate)))
    for _ in range(noise.clutter_corner_count + n_extra):
        pts = np.empty((7, 2))
        pts[:, 0] = rng.uniform(0.0, intrinsics.width - 1.0, size=7)
        pts[:, 1] = rng.uniform(0.0, intrinsics.height - 1.0, size=7)
        detections.append(CornerDetection(points=pts))
    return tuple(detections)


def sample_scenario(
    model: ObjectModel,
    model_id: str,
    intrinsics: CameraIntrinsics,
    noise: NoiseModel,
    seed: int,
    depth_range=(4.0, 8.0),
    min_visible: int = 2,
    max_attempts: int = 64,
) -> Scenario:
    """Sample a ground-truth pose (resampling until at least
    ``min_visible`` corners are detectable) and simulate detections."""
    rng = make_rng(seed, POSE_STREAM)
    pose = None
    for _ in range(max_attempts):
        candidate = sample_pose(rng, model, intrinsics, depth_range)
        if len(visible_corner_indices(model, candidate, intrinsics)) >= min_visible:
            pose = candidate
            break
    if pose is None:
        raise RuntimeError(
            f"no pose with {min_visible} visible corners in {max_attempts} attempts"
        )
    detections = simulate_detections(model, pose, intrinsics, noise, seed)
    return Scenario(
        model_id=model_id,
        gt_pose=pose,
        intrinsics=intrinsics,
        detections=detections,
        seed=seed,
    )


def scenario_to_dict(s: Scenario) -> dict:
    return {
        "model_id": s.model_id,
        "seed": int(s.seed),
        "gt_pose": pose_to_dict(s.gt_pose),
        "intrinsics": intrinsics_to_dict(s.intrinsics),
        "detections": [detection_to_dict(d) for d in s.detections],
    }


def scenario_from_dict(data: dict) -> Scenario:
    return Scenario(
        model_id=str(data["model_id"]),
        gt_pose=pose_from_dict(data["gt_pose"]),
        intrinsics=intrinsics_from_dict(data["intrinsics"]),
        detections=tuple(detection_from_dict(d) for d in data["detections"]),
        seed=int(data["seed"]),
    )


def write_scenarios(path, scenarios) -> None:
    """One JSON object per line."""
    with open(path, "w", encoding="ascii") as fh:
        for s in scenarios:
            fh.write(json.dumps(scenario_to_dict(s), separators=(",", ":")))
            fh.write("\n")


def read_scenarios(path) -> list:
    out = []
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(scenario_from_dict(json.loads(line)))
    return out
