"""Eight-point geometry, the compact ``Phi^T A Phi`` identity, attention
analysis and a small pose-regression MLP, all in numpy."""

from .compact import PatchGrid, basis_expand, compact_moment, expand_compact
from .eight_point import CorrespondenceSet, decompose_essential, estimate_pose, solve_essential
from .geometry import SYNTHETIC_CAMERA, CameraIntrinsics, essential_from_pose, rotation_geodesic, translation_angle
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "CameraIntrinsics", "CorrespondenceSet", "PatchGrid", "SYNTHETIC_CAMERA",
    "basis_expand", "compact_moment", "decompose_essential", "essential_from_pose",
    "estimate_pose", "expand_compact", "rotation_geodesic", "solve_essential",
    "translation_angle",
]
