import numpy as np
import pytest

from cornerpose.estimator import ObjectModel
from cornerpose.geometry import CameraIntrinsics, Pose, project
from cornerpose.shapes import make_cube, make_lshape_prism
from cornerpose.simulate import make_rng, random_rotation


@pytest.fixture(scope="session")
def cube_mesh():
    return make_cube(1.0)


@pytest.fixture(scope="session")
def cube_model(cube_mesh):
    return ObjectModel.from_mesh(cube_mesh)


@pytest.fixture(scope="session")
def lshape_mesh():
    return make_lshape_prism()


@pytest.fixture(scope="session")
def lshape_model(lshape_mesh):
    return ObjectModel.from_mesh(lshape_mesh)


@pytest.fixture(scope="session")
def camera():
    return CameraIntrinsics(fx=600.0, fy=600.0, cx=319.5, cy=239.5, width=640, height=480)


@pytest.fixture(scope="session")
def small_camera():
    return CameraIntrinsics(fx=300.0, fy=300.0, cx=159.5, cy=119.5, width=320, height=240)


def _sample_corner_pose(rng, model, intrinsics, corner_index, depth_range=(4.0, 7.0)):
    """Rejection-sample a pose keeping one corner fully in frame and
    front-facing (used by estimator and acceptance tests)."""
    corner = model.corners[corner_index]
    centroid = model.mesh.vertices.mean(axis=0)
    while True:
        r = random_rotation(rng)
        z = rng.uniform(*depth_range) * model.diameter
        pose = Pose(r, np.array([0.0, 0.0, z]) - r @ centroid)
        cam = pose.transform(corner.points)
        if np.any(cam[:, 2] <= 1e-9):
            continue
        uv = project(intrinsics, pose, corner.points)
        if uv[:, 0].min() < 0.0 or uv[:, 0].max() > intrinsics.width - 1:
            continue
        if uv[:, 1].min() < 0.0 or uv[:, 1].max() > intrinsics.height - 1:
            continue
        ray = cam[0] / np.linalg.norm(cam[0])
        if float((pose.rotation @ corner.diagonal) @ ray) <= 0.0:
            continue
        return pose, uv


@pytest.fixture(scope="session")
def corner_pose_sampler():
    return _sample_corner_pose


@pytest.fixture
def rng():
    return make_rng(12345, 0)
