"""Compare the compiled and pure-Python kernels.

    python3 benchmarks/bench_kernels.py [--repeat N]

Prints median wall time per call for each backend and the speedup.
"""
import argparse
import statistics
import time

import numpy as np

from eightpt import _pykernels
from eightpt.geometry import SYNTHETIC_CAMERA
from eightpt.synthetic import SceneConfig, sample_pose, sample_scene

try:
    from eightpt import _ckernels
except ImportError:
    _ckernels = None


def _time(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=200, help="timed calls per kernel and backend")
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    U = rng.normal(size=(500, 9))
    m = U.T @ U
    scene = sample_scene(SceneConfig(), rng)
    R, t = sample_pose("2dm", rng)
    cam = SYNTHETIC_CAMERA

    cases = {
        "jacobi_eigh 9x9": lambda mod: (lambda: mod.jacobi_eigh(m)),
        "dual_visible 10k": lambda mod: (lambda: mod.dual_visible(scene, R, t, cam.f, cam.cu, cam.cv,
                                                                  cam.width, cam.height)),
    }
    if _ckernels is None:
        print("compiled extension not built; only the Python backend is timed")
    print(f"{'kernel':<18} {'python':>12} {'cython':>12} {'speedup':>8}")
    for name, make in cases.items():
        py = _time(make(_pykernels), args.repeat)
        if _ckernels is None:
            print(f"{name:<18} {py * 1e6:>10.1f}us {'-':>12} {'-':>8}")
            continue
        cy = _time(make(_ckernels), args.repeat)
        print(f"{name:<18} {py * 1e6:>10.1f}us {cy * 1e6:>10.1f}us {py / cy:>7.1f}x")
    np.testing.assert_allclose(_pykernels.jacobi_eigh(m)[0], np.linalg.eigvalsh(m), rtol=1e-12)


if __name__ == "__main__":
    main()
