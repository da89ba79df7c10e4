"""Rotations, pinhole projection and essential-matrix algebra.

Conventions used throughout the package:

* A relative pose ``(R, t)`` maps camera-1 coordinates to camera-2
  coordinates, ``X2 = R @ X1 + t``.
* The essential matrix is ``E = [t]x R`` so that ``x2^T E x1 = 0`` for
  normalized homogeneous image points.
* Quaternions are stored ``(w, x, y, z)``.
* All angles returned to callers are in degrees.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateDirectionError,
    DegenerateLineError,
    InvalidRotationError,
    PureRotationError,
)

ROTATION_TOL = 1e-9
QUAT_TOL = 1e-9


@dataclass(frozen=True)
class CameraIntrinsics:
    f: float
    cu: float
    cv: float
    width: float
    height: float

    def __post_init__(self):
        if not self.f > 0:
            raise ValueError(f"focal length must be positive, got {self.f}")
        if not (self.width > 0 and self.height > 0):
            raise ValueError("image width and height must be positive")

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.f, 0.0, self.cu], [0.0, self.f, self.cv], [0.0, 0.0, 1.0]])

    def normalize(self, uv: np.ndarray) -> np.ndarray:
        """Pixel coordinates (N, 2) to homogeneous normalized points ``K^-1 [u, v, 1]``."""
        uv = np.atleast_2d(np.asarray(uv, dtype=float))
        out = np.ones((uv.shape[0], 3))
        out[:, 0] = (uv[:, 0] - self.cu) / self.f
        out[:, 1] = (uv[:, 1] - self.cv) / self.f
        return out

    def denormalize(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.stack([self.f * x[:, 0] / x[:, 2] + self.cu,
                         self.f * x[:, 1] / x[:, 2] + self.cv], axis=1)


# 800x800 sensor, focal length 800, principal point at the centre.
SYNTHETIC_CAMERA = CameraIntrinsics(f=800.0, cu=400.0, cv=400.0, width=800.0, height=800.0)


def skew(t) -> np.ndarray:
    t = np.asarray(t, dtype=float).reshape(3)
    return np.array([[0.0, -t[2], t[1]], [t[2], 0.0, -t[0]], [-t[1], t[0], 0.0]])


def rot_x(deg: float) -> np.ndarray:
    c, s = np.cos(np.radians(deg)), np.sin(np.radians(deg))
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(deg: float) -> np.ndarray:
    c, s = np.cos(np.radians(deg)), np.sin(np.radians(deg))
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(deg: float) -> np.ndarray:
    c, s = np.cos(np.radians(deg)), np.sin(np.radians(deg))
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def euler_to_matrix(theta_x: float, theta_y: float, theta_z: float) -> np.ndarray:
    """``R = Rz(theta_z) @ Ry(theta_y) @ Rx(theta_x)``, angles in degrees."""
    return rot_z(theta_z) @ rot_y(theta_y) @ rot_x(theta_x)


def quat_to_matrix(q) -> np.ndarray:
    w, x, y, z = _as_unit_quat(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def matrix_to_quat(R) -> np.ndarray:
    """Rotation matrix to a unit quaternion with ``w >= 0``."""
    R = check_rotation(R)
    tr = np.trace(R)
    # Shepperd's method: branch on the largest diagonal term for stability.
    if tr > max(R[0, 0], R[1, 1], R[2, 2]):
        s = 2.0 * np.sqrt(1.0 + tr)
        q = np.array([0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s])
    elif R[0, 0] >= R[1, 1] and R[0, 0] >= R[2, 2]:
        s = 2.0 * np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q = np.array([(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s])
    elif R[1, 1] >= R[2, 2]:
        s = 2.0 * np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        q = np.array([(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s])
    else:
        s = 2.0 * np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        q = np.array([(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s])
    return canonical_quat(q)


def canonical_quat(q) -> np.ndarray:
    """Unit-normalize and pick the hemisphere with ``w >= 0``."""
    q = np.asarray(q, dtype=float).reshape(4)
    n = np.linalg.norm(q)
    if n < 1e-12:
        raise InvalidRotationError("zero quaternion")
    q = q / n
    return -q if q[0] < 0 else q


def check_rotation(R, tol: float = ROTATION_TOL) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        raise InvalidRotationError(f"expected a 3x3 matrix, got shape {R.shape}")
    if np.max(np.abs(R.T @ R - np.eye(3))) > tol or abs(np.linalg.det(R) - 1.0) > tol:
        raise InvalidRotationError("matrix is not a proper rotation")
    return R


def _as_unit_quat(q, tol: float = QUAT_TOL) -> np.ndarray:
    q = np.asarray(q, dtype=float).reshape(4)
    if abs(np.linalg.norm(q) - 1.0) > tol:
        raise InvalidRotationError(f"quaternion norm {np.linalg.norm(q)} is not 1")
    return q


def rotation_geodesic(a, b) -> float:
    """Angle of the relative rotation between ``a`` and ``b`` in degrees.

    Accepts either two 3x3 rotation matrices or two unit quaternions. The
    result lies in [0, 180] and does not depend on quaternion sign.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape == (4,) and b.shape == (4,):
        a, b = _as_unit_quat(a), _as_unit_quat(b)
        if a @ b < 0:
            b = -b
        # 4 atan2(|a-b|, |a+b|) stays accurate near 0 and 180 degrees
        return float(np.degrees(4.0 * np.arctan2(np.linalg.norm(a - b), np.linalg.norm(a + b))))
    if a.shape == (4,):
        a = quat_to_matrix(a)
    if b.shape == (4,):
        b = quat_to_matrix(b)
    rel = check_rotation(a).T @ check_rotation(b)
    sin_part = 0.5 * np.linalg.norm([rel[2, 1] - rel[1, 2], rel[0, 2] - rel[2, 0], rel[1, 0] - rel[0, 1]])
    cos_part = 0.5 * (np.trace(rel) - 1.0)
    return float(np.degrees(np.arctan2(sin_part, cos_part)))


def translation_angle(a, b) -> float:
    """Angle between two directions in degrees; invariant to positive scaling."""
    a = np.asarray(a, dtype=float).reshape(3)
    b = np.asarray(b, dtype=float).reshape(3)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na < 1e-12 or nb < 1e-12:
        raise DegenerateDirectionError("translation direction of (near) zero length")
    return float(np.degrees(np.arctan2(np.linalg.norm(np.cross(a, b)), a @ b)))


def transform(points, R, t) -> np.ndarray:
    return np.asarray(points, dtype=float) @ np.asarray(R, dtype=float).T + np.asarray(t, dtype=float).reshape(3)


def project_points(points, R, t, cam: CameraIntrinsics):
    """Project world points into a camera with pose ``X_cam = R X + t``.

    Returns ``(uv, valid)``: pixel coordinates (N, 2) and a boolean mask that
    is true when the point has positive depth and lands on the sensor
    ``[0, width] x [0, height]`` (boundary included). Pixels of points behind
    the camera are still computed but meaningless.
    """
    Xc = transform(np.atleast_2d(points), R, t)
    z = Xc[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = cam.f * Xc[:, 0] / z + cam.cu
        v = cam.f * Xc[:, 1] / z + cam.cv
    valid = (z > 0) & (u >= 0) & (u <= cam.width) & (v >= 0) & (v <= cam.height)
    return np.stack([u, v], axis=1), valid


def unproject_points(uv, depth, R, t, cam: CameraIntrinsics) -> np.ndarray:
    """Inverse of :func:`project_points` given the camera-frame depth of each pixel."""
    x = cam.normalize(uv) * np.asarray(depth, dtype=float).reshape(-1, 1)
    R = np.asarray(R, dtype=float)
    return (x - np.asarray(t, dtype=float).reshape(3)) @ R


def canonical_essential(E) -> np.ndarray:
    """Frobenius-normalize and make the largest-magnitude entry positive."""
    E = np.asarray(E, dtype=float)
    E = E / np.linalg.norm(E)
    flat = E.ravel()
    if flat[np.argmax(np.abs(flat))] < 0:
        E = -E
    return E


def essential_from_pose(R, t) -> np.ndarray:
    t = np.asarray(t, dtype=float).reshape(3)
    if np.linalg.norm(t) < 1e-12:
        raise PureRotationError("pure rotation has no essential matrix")
    return canonical_essential(skew(t) @ check_rotation(R))


def same_up_to_sign(A, B, tol: float) -> bool:
    A, B = np.asarray(A), np.asarray(B)
    return bool(min(np.max(np.abs(A - B)), np.max(np.abs(A + B))) <= tol)


def epipolar_line(E, x) -> np.ndarray:
    """Line ``l' = E x`` in image 2 on which the match of ``x`` must lie."""
    x = np.asarray(x, dtype=float).reshape(3)
    line = np.asarray(E, dtype=float) @ x
    if np.hypot(line[0], line[1]) < 1e-12:
        raise DegenerateLineError("point maps to the epipole; line undefined")
    return line


def point_line_distance(line, x) -> float:
    x = np.asarray(x, dtype=float).reshape(3)
    x = x / x[2]
    return float(abs(line @ x) / np.hypot(line[0], line[1]))
