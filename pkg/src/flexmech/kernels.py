"""Backend selection for the hot numerical kernels.

The compiled extension ``_ckernels`` is used when it imports; otherwise the
pure-Python module is used. Set ``FLEXMECH_PURE_PYTHON=1`` to force the
fallback (the benchmark and the kernel-parity tests do this per module).
"""
import os

from . import _pykernels
from ._pykernels import GL_ORDER, KernelConvergenceError

_backend = _pykernels
BACKEND = "python"

if os.environ.get("FLEXMECH_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _backend  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _backend = _pykernels

gamma_quad = _backend.gamma_quad
rk4_final = _backend.rk4_final
rk4_profile = _backend.rk4_profile
shoot = _backend.shoot

__all__ = [
    "BACKEND",
    "GL_ORDER",
    "KernelConvergenceError",
    "gamma_quad",
    "rk4_final",
    "rk4_profile",
    "shoot",
]
