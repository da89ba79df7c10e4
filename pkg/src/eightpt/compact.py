"""Quadratic basis expansion and the compact 6x6 form of ``U^T U``.

For a correspondence ``x = (u, v, 1) <-> x' = (u', v', 1)`` the 81 entries
of ``(x (x) x')(x (x) x')^T`` take only 36 distinct values, all of which
appear in ``phi(x) phi(x')^T`` with ``phi(u, v) = (1, u, v, uv, u^2, v^2)``.
Summed over a patch grid with a binary correspondence indicator ``A`` this
becomes ``Phi^T A Phi``.

Orientation: in ``Phi^T A Phi`` rows of ``A`` index image-1 patches and
columns image-2 patches, so the moment's rows are the image-1 basis and its
columns the image-2 basis, matching ``phi(x) phi(x')^T``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import NormalizationError, UndefinedCorrelationError

# 1-based positions in phi of the entries of x x^T = [[u^2, uv, u], [uv, v^2, v], [u, v, 1]].
BLOCK_MAP = ((5, 4, 2), (4, 6, 3), (2, 3, 1))

_B = np.array(BLOCK_MAP) - 1
# full[3i + i', 3j + j'] = m[B[i, j], B[i', j']]
_ROW_INDEX = np.empty((9, 9), dtype=int)
_COL_INDEX = np.empty((9, 9), dtype=int)
for _i in range(3):
    for _ip in range(3):
        for _j in range(3):
            for _jp in range(3):
                _ROW_INDEX[3 * _i + _ip, 3 * _j + _jp] = _B[_i, _j]
                _COL_INDEX[3 * _i + _ip, 3 * _j + _jp] = _B[_ip, _jp]


def basis_expand(x) -> np.ndarray:
    """``phi([u, v, 1]) = [1, u, v, uv, u^2, v^2]``.

    Accepts one point or an (N, 3) array; returns shape (6,) or (N, 6).
    """
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[1] != 3:
        raise ValueError("basis_expand expects homogeneous points [u, v, 1]")
    if np.any(pts[:, 2] != 1.0):
        raise NormalizationError("last homogeneous coordinate must be exactly 1")
    u, v = pts[:, 0], pts[:, 1]
    out = np.stack([np.ones_like(u), u, v, u * v, u * u, v * v], axis=1)
    return out[0] if single else out


@dataclass(frozen=True)
class PatchGrid:
    """``g x g`` patches with centres at cell midpoints of ``[lo, hi]^2``.

    Patch ``j = row * g + col`` where ``col`` runs along ``u`` and ``row``
    along ``v``.
    """

    g: int
    lo: float = -0.5
    hi: float = 0.5

    def __post_init__(self):
        if self.g < 1:
            raise ValueError("grid size must be positive")

    @property
    def P(self) -> int:
        return self.g * self.g

    @property
    def cell(self) -> float:
        return (self.hi - self.lo) / self.g

    @property
    def axis_centres(self) -> np.ndarray:
        return self.lo + (np.arange(self.g) + 0.5) * self.cell

    @property
    def centres(self) -> np.ndarray:
        """Homogeneous patch centres, shape (P, 3)."""
        c = self.axis_centres
        vv, uu = np.meshgrid(c, c, indexing="ij")
        return np.stack([uu.ravel(), vv.ravel(), np.ones(self.P)], axis=1)

    @property
    def phi(self) -> np.ndarray:
        """Matrix ``Phi`` of shape (P, 6)."""
        return basis_expand(self.centres)

    def patch_index(self, x) -> np.ndarray:
        """Patch containing each normalized point (N, 2|3); edges clamp inward."""
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        col = np.clip(np.floor((pts[:, 0] - self.lo) / self.cell), 0, self.g - 1).astype(int)
        row = np.clip(np.floor((pts[:, 1] - self.lo) / self.cell), 0, self.g - 1).astype(int)
        return row * self.g + col


def compact_moment(grid: PatchGrid, A, grid2: PatchGrid | None = None) -> np.ndarray:
    """``Phi_1^T A Phi_2``; both sides use ``grid`` unless ``grid2`` is given."""
    A = np.asarray(A, dtype=float)
    phi1 = grid.phi
    phi2 = phi1 if grid2 is None else grid2.phi
    if A.shape != (len(phi1), len(phi2)):
        raise ValueError(f"indicator shape {A.shape} does not match grids ({len(phi1)}, {len(phi2)})")
    return phi1.T @ A @ phi2


def compact_moment_transposed(grid: PatchGrid, A) -> np.ndarray:
    """Moment for the reverse direction (image-2 basis on the rows)."""
    return compact_moment(grid, np.asarray(A, dtype=float).T)


def expand_compact(m) -> np.ndarray:
    """Lay the 36 entries of a compact moment out as the full 9x9 ``U^T U``."""
    m = np.asarray(m, dtype=float)
    if m.shape != (6, 6):
        raise ValueError(f"compact moment must be 6x6, got {m.shape}")
    return m[_ROW_INDEX, _COL_INDEX]


def correspondences_from_indicator(grid: PatchGrid, A):
    """Patch centres ``(x, x')`` for every nonzero entry of a binary indicator."""
    j, k = np.nonzero(np.asarray(A))
    centres = grid.centres
    return centres[j], centres[k]


def random_matching(g: int, n_matches: int, rng) -> np.ndarray:
    """Random binary one-to-one indicator on a ``g x g`` grid."""
    P = g * g
    if not 0 <= n_matches <= P:
        raise ValueError("number of matches must be between 0 and P")
    rows = rng.choice(P, size=n_matches, replace=False)
    cols = rng.choice(P, size=n_matches, replace=False)
    A = np.zeros((P, P))
    A[rows, cols] = 1.0
    return A


def spearman_rank(a, b) -> float:
    """Spearman correlation with average ranks for ties."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape or len(a) < 2:
        raise ValueError("need two sequences of equal length >= 2")
    ra = rankdata(a) - (len(a) + 1) / 2.0
    rb = rankdata(b) - (len(b) + 1) / 2.0
    denom = np.sqrt((ra @ ra) * (rb @ rb))
    if denom == 0:
        raise UndefinedCorrelationError("rank correlation undefined for constant input")
    return float(np.clip((ra @ rb) / denom, -1.0, 1.0))


def verify_identity(trials: int, grids, seed: int) -> dict:
    """Check ``expand(Phi^T A Phi) == U^T U`` on random one-to-one matchings.

    Trials are spread round-robin over ``grids``. Returns a summary with the
    worst relative error and the number of failures at tolerance 1e-9.
    """
    from .eight_point import CorrespondenceSet, build_design_matrix, normal_matrix
    from .rng import derive_rng

    grids = list(grids)
    worst = 0.0
    failures = 0
    cache = {g: PatchGrid(g) for g in grids}
    for i in range(trials):
        g = grids[i % len(grids)]
        rng = derive_rng(seed, "verify-identity", i)
        P = g * g
        A = random_matching(g, int(rng.integers(1, P + 1)), rng)
        full = expand_compact(compact_moment(cache[g], A))
        x, xp = correspondences_from_indicator(cache[g], A)
        ref = normal_matrix(build_design_matrix(CorrespondenceSet(x, xp)))
        err = float(np.max(np.abs(full - ref)) / max(np.max(np.abs(ref)), 1e-300))
        worst = max(worst, err)
        failures += err > 1e-9
    return {"trials": trials, "grids": grids, "seed": seed, "max_rel_error": worst, "failures": failures}
