import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from eightpt import _pykernels, kernels
from eightpt.geometry import SYNTHETIC_CAMERA, project_points

try:
    from eightpt import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = [pytest.param(_pykernels, id="python"),
            pytest.param(_ckernels, id="cython",
                         marks=pytest.mark.skipif(_ckernels is None, reason="extension not built"))]


@pytest.mark.parametrize("mod", BACKENDS)
def test_jacobi_against_numpy(mod, rng):
    for _ in range(50):
        a = rng.normal(size=(9, 9))
        a = a + a.T
        w, v = mod.jacobi_eigh(a)
        np.testing.assert_allclose(w, np.linalg.eigvalsh(a), atol=1e-12 * np.abs(a).max())
        np.testing.assert_allclose(v.T @ v, np.eye(9), atol=1e-12)
        np.testing.assert_allclose(a @ v, v * w, atol=1e-11 * np.abs(a).max())


@pytest.mark.parametrize("mod", BACKENDS)
def test_jacobi_diagonal_input(mod):
    w, v = mod.jacobi_eigh(np.diag([3.0, -1.0, 2.0]))
    np.testing.assert_array_equal(w, [-1.0, 2.0, 3.0])
    assert np.allclose(np.abs(v), np.eye(3)[:, [1, 2, 0]])


@pytest.mark.parametrize("mod", BACKENDS)
def test_jacobi_psd_rank_deficient(mod, rng):
    U = rng.normal(size=(5, 9))
    w, v = mod.jacobi_eigh(U.T @ U)
    assert np.all(np.abs(w[:4]) < 1e-10 * w[-1])


@given(arrays(np.float64, (9, 9), elements=st.floats(-1e3, 1e3)))
@settings(max_examples=60, deadline=None)
def test_jacobi_property(a):
    a = a + a.T
    w, v = kernels.jacobi_eigh(a)
    scale = max(np.abs(a).max(), 1.0)
    np.testing.assert_allclose(v @ np.diag(w) @ v.T, a, atol=1e-10 * scale)


@pytest.mark.skipif(_ckernels is None, reason="extension not built")
def test_backends_agree_bitwise(rng):
    for _ in range(20):
        a = rng.normal(size=(9, 9))
        a = a + a.T
        wc, vc = _ckernels.jacobi_eigh(a)
        wp, vp = _pykernels.jacobi_eigh(a)
        np.testing.assert_allclose(wc, wp, rtol=0, atol=1e-13)
        np.testing.assert_allclose(vc, vp, rtol=0, atol=1e-13)


@pytest.mark.parametrize("mod", BACKENDS)
def test_dual_visible_matches_projection(mod, rng):
    cam = SYNTHETIC_CAMERA
    for _ in range(10):
        R = np.linalg.qr(rng.normal(size=(3, 3)))[0]
        R *= np.linalg.det(R)
        t = rng.uniform(-1, 1, 3)
        X = rng.uniform(-2, 2, (2000, 3))
        _, ok1 = project_points(X, np.eye(3), np.zeros(3), cam)
        _, ok2 = project_points(X, R, t, cam)
        got = mod.dual_visible(X, R, t, cam.f, cam.cu, cam.cv, cam.width, cam.height)
        np.testing.assert_array_equal(np.asarray(got, dtype=bool), ok1 & ok2)


def test_backend_selected():
    assert kernels.BACKEND in ("cython", "python")


def test_pure_python_override():
    import os
    import subprocess
    import sys
    env = dict(os.environ, EIGHTPT_PURE_PYTHON="1")
    code = ("from eightpt import kernels, estimate_pose; import numpy as np; "
            "print(kernels.BACKEND)")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
