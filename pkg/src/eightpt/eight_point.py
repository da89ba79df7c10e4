"""The linear eight-point algorithm for calibrated cameras.

Pipeline: correspondences -> design matrix ``U`` (rows ``x (x) x'``) ->
normal matrix ``U^T U`` -> eigenvector of the smallest eigenvalue ->
reshape to ``E`` -> project onto the essential manifold -> four-way
``(R, t)`` decomposition -> cheirality vote.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import AmbiguousDecompositionError, DegenerateConfigurationError, NormalizationError
from .geometry import canonical_essential

# Rotation by +90 degrees about z used to build the candidate rotations.
_W = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])

DEGENERACY_RATIO = 1e-10


def _homogeneous(points) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] == 2:
        return np.hstack([pts, np.ones((len(pts), 1))])
    if pts.shape[1] != 3:
        raise ValueError(f"points must have 2 or 3 columns, got {pts.shape[1]}")
    w = pts[:, 2:3]
    if np.any(np.abs(w) < 1e-12):
        raise NormalizationError("homogeneous point at infinity")
    return pts / w


@dataclass(frozen=True)
class CorrespondenceSet:
    """Matched normalized points ``x[i] <-> xp[i]``, stored with last coordinate 1.

    Accepts (N, 2) inhomogeneous or (N, 3) homogeneous input; homogeneous
    rows are rescaled so that their last coordinate is exactly 1.
    """

    x: np.ndarray
    xp: np.ndarray

    def __post_init__(self):
        x = _homogeneous(self.x)
        xp = _homogeneous(self.xp)
        if x.shape != xp.shape:
            raise ValueError(f"mismatched correspondence arrays {x.shape} vs {xp.shape}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "xp", xp)

    def __len__(self) -> int:
        return len(self.x)


def build_design_matrix(c: CorrespondenceSet) -> np.ndarray:
    """Rows ``x_i (x) x'_i = (u u', u v', u, v u', v v', v, u', v', 1)``."""
    n = len(c)
    return np.einsum("ni,nj->nij", c.x, c.xp).reshape(n, 9)


def essential_to_vector(E) -> np.ndarray:
    """Arrange ``E`` so that ``U[i] @ e == x'_i^T E x_i``."""
    return np.asarray(E, dtype=float).T.reshape(9)


def vector_to_essential(e) -> np.ndarray:
    return np.asarray(e, dtype=float).reshape(3, 3).T


def normal_matrix(U) -> np.ndarray:
    U = np.asarray(U, dtype=float).reshape(-1, 9)
    M = U.T @ U
    return 0.5 * (M + M.T)


def enforce_essential(E) -> np.ndarray:
    """Replace singular values by ``(s, s, 0)`` with ``s`` the mean of the top two."""
    Us, S, Vt = np.linalg.svd(np.asarray(E, dtype=float))
    s = 0.5 * (S[0] + S[1])
    return canonical_essential(Us @ np.diag([s, s, 0.0]) @ Vt)


def solve_essential(m) -> np.ndarray:
    """Essential matrix from a 9x9 normal matrix.

    Raises :class:`DegenerateConfigurationError` when the two smallest
    eigenvalues are both negligible, i.e. the solution is not unique.
    """
    m = np.asarray(m, dtype=float)
    if m.shape != (9, 9):
        raise ValueError(f"normal matrix must be 9x9, got {m.shape}")
    w, V = kernels.jacobi_eigh(0.5 * (m + m.T))
    if not w[-1] > 0 or w[1] < DEGENERACY_RATIO * w[-1]:
        raise DegenerateConfigurationError(
            f"second-smallest eigenvalue {w[1]:.3e} vs largest {w[-1]:.3e}: solution not unique")
    return enforce_essential(vector_to_essential(V[:, 0]))


def epipolar_residuals(E, c: CorrespondenceSet) -> np.ndarray:
    """Algebraic residuals ``x'_i^T E x_i``."""
    return np.einsum("ni,ij,nj->n", c.xp, np.asarray(E, dtype=float), c.x)


def triangulate_midpoint(R, t, x, xp):
    """Midpoint triangulation of normalized rays; returns depths in both cameras.

    Camera 1 sits at the origin; camera 2 has pose ``X2 = R X1 + t``.
    Rays that are (nearly) parallel get depth NaN.
    """
    R = np.asarray(R, dtype=float)
    t = np.asarray(t, dtype=float).reshape(3)
    d1 = np.atleast_2d(x)
    d2 = np.atleast_2d(xp) @ R  # R^T x' in camera-1 frame
    c2 = -R.T @ t
    a11 = np.einsum("ij,ij->i", d1, d1)
    a12 = np.einsum("ij,ij->i", d1, d2)
    a22 = np.einsum("ij,ij->i", d2, d2)
    b1 = d1 @ c2
    b2 = d2 @ c2
    det = a11 * a22 - a12 * a12
    ok = det > 1e-12 * a11 * a22
    with np.errstate(divide="ignore", invalid="ignore"):
        lam1 = np.where(ok, (b1 * a22 - a12 * b2) / det, np.nan)
        lam2 = np.where(ok, (a12 * b1 - a11 * b2) / det, np.nan)
    X = 0.5 * (lam1[:, None] * d1 + c2 + lam2[:, None] * d2)
    depth1 = X[:, 2]
    depth2 = X @ R[2] + t[2]
    return depth1, depth2


def pose_candidates(E):
    """The four ``(R, t)`` pairs compatible with ``E``: ``{R, R'} x {+t, -t}``."""
    Us, _, Vt = np.linalg.svd(np.asarray(E, dtype=float))
    # Flipping the null-space singular vectors leaves E unchanged.
    if np.linalg.det(Us) < 0:
        Us[:, 2] *= -1
    if np.linalg.det(Vt) < 0:
        Vt[2] *= -1
    R1 = Us @ _W @ Vt
    R2 = Us @ _W.T @ Vt
    t = Us[:, 2] / np.linalg.norm(Us[:, 2])
    return [(R1, t), (R1, -t), (R2, t), (R2, -t)]


@dataclass
class EssentialDecomposition:
    candidates: list
    votes: list
    selected: int
    E: np.ndarray = field(repr=False, default=None)

    @property
    def rotation(self) -> np.ndarray:
        return self.candidates[self.selected][0]

    @property
    def translation(self) -> np.ndarray:
        return self.candidates[self.selected][1]

    def to_dict(self) -> dict:
        return {
            "E": np.asarray(self.E).tolist(),
            "candidates": [{"R": R.tolist(), "t": t.tolist(), "votes": int(v)}
                           for (R, t), v in zip(self.candidates, self.votes)],
            "selected": int(self.selected),
            "R": self.rotation.tolist(),
            "t": self.translation.tolist(),
        }


def decompose_essential(E, c: CorrespondenceSet) -> EssentialDecomposition:
    """Pick the candidate that puts the most points in front of both cameras."""
    if len(c) < 1:
        raise ValueError("cheirality needs at least one correspondence")
    candidates = pose_candidates(E)
    votes = []
    for R, t in candidates:
        d1, d2 = triangulate_midpoint(R, t, c.x, c.xp)
        votes.append(int(np.sum((d1 > 0) & (d2 > 0))))
    best = max(votes)
    if votes.count(best) > 1:
        raise AmbiguousDecompositionError(f"cheirality tie between candidates: votes {votes}")
    return EssentialDecomposition(candidates, votes, votes.index(best), np.asarray(E, dtype=float))


def estimate_pose(c: CorrespondenceSet) -> EssentialDecomposition:
    """Full eight-point pipeline on a correspondence set."""
    E = solve_essential(normal_matrix(build_design_matrix(c)))
    return decompose_essential(E, c)
