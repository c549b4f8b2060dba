"""Kernel selection.

The compiled extension is used when it imports; set ``DIRAC_ASYM_PURE=1``
to force the pure-Python path.
"""
import os

from . import _pykernels

BACKEND = "python"
if not os.environ.get("DIRAC_ASYM_PURE"):
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
else:
    _impl = _pykernels

running_forward = _impl.running_forward
running_backward = _impl.running_backward
apply_local = _impl.apply_local

__all__ = ["BACKEND", "running_forward", "running_backward", "apply_local"]
