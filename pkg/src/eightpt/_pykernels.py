"""Pure-Python implementations of the hot kernels.

These mirror ``_ckernels.pyx`` exactly and are used when the compiled
extension is unavailable or when ``EIGHTPT_PURE_PYTHON=1`` is set.
"""
import math

import numpy as np


def jacobi_eigh(a, tol=1e-14, max_sweeps=64):
    """Cyclic Jacobi eigendecomposition of a small symmetric matrix.

    Sweeps stop once the off-diagonal Frobenius norm drops below
    ``tol * ||a||_F`` (or is exactly zero). Returns ``(w, V)`` with
    eigenvalues ascending and eigenvectors in the columns of ``V``.
    """
    arr = np.asarray(a, dtype=float)
    n = arr.shape[0]
    if arr.shape != (n, n):
        raise ValueError("matrix must be square")
    A = arr.tolist()
    V = [[1.0 if i == j else 0.0 for j in range(n)] for i in range(n)]
    scale = math.sqrt(sum(x * x for row in A for x in row))
    thresh = tol * scale

    for _ in range(max_sweeps):
        off = 0.0
        for p in range(n):
            for q in range(p + 1, n):
                off += A[p][q] * A[p][q]
        off = math.sqrt(2.0 * off)
        if off <= thresh:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p][q]
                if apq == 0.0:
                    continue
                theta = (A[q][q] - A[p][p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    row = A[k]
                    akp = row[p]
                    akq = row[q]
                    row[p] = c * akp - s * akq
                    row[q] = s * akp + c * akq
                Ap = A[p]
                Aq = A[q]
                for k in range(n):
                    apk = Ap[k]
                    aqk = Aq[k]
                    Ap[k] = c * apk - s * aqk
                    Aq[k] = s * apk + c * aqk
                Ap[q] = 0.0
                Aq[p] = 0.0
                for k in range(n):
                    row = V[k]
                    vkp = row[p]
                    vkq = row[q]
                    row[p] = c * vkp - s * vkq
                    row[q] = s * vkp + c * vkq

    w = np.array([A[i][i] for i in range(n)])
    V = np.array(V)
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def dual_visible(points, R, t, f, cu, cv, width, height):
    """Mask of points visible in camera 1 (identity pose) and camera 2 ``(R, t)``."""
    X = np.asarray(points, dtype=float)
    X2 = X @ np.asarray(R, dtype=float).T + np.asarray(t, dtype=float)
    mask = np.ones(len(X), dtype=bool)
    for P in (X, X2):
        z = P[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            u = f * P[:, 0] / z + cu
            v = f * P[:, 1] / z + cv
        mask &= (z > 0) & (u >= 0) & (u <= width) & (v >= 0) & (v <= height)
    return mask
