"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise, or when the
environment variable ``EIGHTPT_PURE_PYTHON`` is set to a non-empty value
other than ``0``, the pure-Python fallback is used. ``BACKEND`` names the
active choice.
"""
import os

from . import _pykernels

_force_pure = os.environ.get("EIGHTPT_PURE_PYTHON", "") not in ("", "0")

if _force_pure:
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"

jacobi_eigh = _impl.jacobi_eigh
dual_visible = _impl.dual_visible

__all__ = ["BACKEND", "jacobi_eigh", "dual_visible"]
