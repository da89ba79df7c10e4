# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs

cnp.import_array()


def jacobi_eigh(a, double tol=1e-14, int max_sweeps=64):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] A = np.array(a, dtype=np.float64, order="C", copy=True)
    cdef Py_ssize_t n = A.shape[0]
    if A.shape[1] != n:
        raise ValueError("matrix must be square")
    cdef cnp.ndarray[cnp.float64_t, ndim=2] V = np.eye(n, dtype=np.float64)
    cdef double[:, ::1] Am = A
    cdef double[:, ::1] Vm = V
    cdef Py_ssize_t p, q, k
    cdef int sweep
    cdef double scale = 0.0, thresh, off, apq, theta, t, c, s, x, y

    with nogil:
        for p in range(n):
            for q in range(n):
                scale += Am[p, q] * Am[p, q]
        thresh = tol * sqrt(scale)
        for sweep in range(max_sweeps):
            off = 0.0
            for p in range(n):
                for q in range(p + 1, n):
                    off += Am[p, q] * Am[p, q]
            off = sqrt(2.0 * off)
            if off <= thresh:
                break
            for p in range(n - 1):
                for q in range(p + 1, n):
                    apq = Am[p, q]
                    if apq == 0.0:
                        continue
                    theta = (Am[q, q] - Am[p, p]) / (2.0 * apq)
                    t = 1.0 / (fabs(theta) + sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                    c = 1.0 / sqrt(t * t + 1.0)
                    s = t * c
                    for k in range(n):
                        x = Am[k, p]
                        y = Am[k, q]
                        Am[k, p] = c * x - s * y
                        Am[k, q] = s * x + c * y
                    for k in range(n):
                        x = Am[p, k]
                        y = Am[q, k]
                        Am[p, k] = c * x - s * y
                        Am[q, k] = s * x + c * y
                    Am[p, q] = 0.0
                    Am[q, p] = 0.0
                    for k in range(n):
                        x = Vm[k, p]
                        y = Vm[k, q]
                        Vm[k, p] = c * x - s * y
                        Vm[k, q] = s * x + c * y

    w = np.diagonal(A).copy()
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def dual_visible(points, R, t, double f, double cu, double cv, double width, double height):
    cdef double[:, ::1] X = np.ascontiguousarray(points, dtype=np.float64)
    cdef double[:, ::1] Rm = np.ascontiguousarray(R, dtype=np.float64)
    cdef double[::1] tm = np.ascontiguousarray(t, dtype=np.float64).reshape(3)
    cdef Py_ssize_t n = X.shape[0], i
    out = np.zeros(n, dtype=np.bool_)
    cdef cnp.npy_bool[::1] mask = out
    cdef double x, y, z, x2, y2, z2, u, v
    with nogil:
        for i in range(n):
            x = X[i, 0]
            y = X[i, 1]
            z = X[i, 2]
            if z <= 0.0:
                continue
            u = f * x / z + cu
            v = f * y / z + cv
            if u < 0.0 or u > width or v < 0.0 or v > height:
                continue
            x2 = Rm[0, 0] * x + Rm[0, 1] * y + Rm[0, 2] * z + tm[0]
            y2 = Rm[1, 0] * x + Rm[1, 1] * y + Rm[1, 2] * z + tm[1]
            z2 = Rm[2, 0] * x + Rm[2, 1] * y + Rm[2, 2] * z + tm[2]
            if z2 <= 0.0:
                continue
            u = f * x2 / z2 + cu
            v = f * y2 / z2 + cv
            if u < 0.0 or u > width or v < 0.0 or v > height:
                continue
            mask[i] = 1
    return out
