"""Trajectory propagation kernels.

The compiled Cython kernel is preferred; the numpy implementation is the
fallback.  Set FSUC_PURE_PYTHON=1 to force the fallback (used by the
benchmark and by CI environments without a compiler).
"""

import os

__all__ = ["propagate_affine", "BACKEND"]


def _select():
    if os.environ.get("FSUC_PURE_PYTHON", "0") not in ("", "0"):
        from . import _propagate_py as mod

        return mod, "python"
    try:
        from . import _propagate as mod  # type: ignore[attr-defined]

        return mod, "cython"
    except ImportError:
        from . import _propagate_py as mod

        return mod, "python"


_mod, BACKEND = _select()
propagate_affine = _mod.propagate_affine
