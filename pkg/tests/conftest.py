import numpy as np
import pytest

from eightpt.geometry import SYNTHETIC_CAMERA, euler_to_matrix, project_points
from eightpt.synthetic import sample_pose


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_rotation(rng):
    return euler_to_matrix(*rng.uniform(0.0, 360.0, size=3))


def random_instance(rng, n_min=50, n_points=2000):
    """Noise-free pose and on-sensor correspondences in normalized coordinates."""
    cam = SYNTHETIC_CAMERA
    while True:
        R, t = sample_pose("3d", rng)
        X = rng.uniform(-1.0, 1.0, size=(n_points, 3))
        uv1, ok1 = project_points(X, np.eye(3), np.zeros(3), cam)
        uv2, ok2 = project_points(X, R, t, cam)
        ok = ok1 & ok2
        if np.count_nonzero(ok) >= n_min:
            return R, t, cam.normalize(uv1[ok]), cam.normalize(uv2[ok])
