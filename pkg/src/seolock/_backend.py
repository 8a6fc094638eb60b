"""Kernel backend selection.

The compiled extension is preferred; set ``SEOLOCK_PURE_PYTHON=1`` to force
the numpy/pure-Python implementation.
"""
import os

from . import _pykernels

python_kernels = _pykernels

if os.environ.get("SEOLOCK_PURE_PYTHON", "").strip() not in ("", "0"):
    kernels = _pykernels
    compiled_kernels = None
else:
    try:
        from . import _kernels as compiled_kernels
    except ImportError:
        compiled_kernels = None
        kernels = _pykernels
    else:
        kernels = compiled_kernels

BACKEND = "compiled" if kernels is compiled_kernels else "python"
