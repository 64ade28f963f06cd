"""Kernel selection: compiled Cython kernels when importable, numpy otherwise.

Set ``ANISOSMOOTH_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _fallback as fallback

compiled = None
if not os.environ.get("ANISOSMOOTH_PURE_PYTHON"):
    try:
        from . import _kernels as compiled
    except ImportError:
        compiled = None

kernels = compiled if compiled is not None else fallback
NAME = "cython" if compiled is not None else "numpy"
