"""Convolution kernel backend selection.

The compiled Cython kernels are preferred when the extension was built;
otherwise the NumPy fallback is used. BIOATTN_KERNELS=python|cython forces
a backend (the forced cython choice raises if the extension is missing).
"""

import os

_forced = os.environ.get("BIOATTN_KERNELS", "").strip().lower()

if _forced == "python":
    from bioattn.kernels import _conv_py as _impl
elif _forced == "cython":
    from bioattn.kernels import _conv_cy as _impl
else:
    try:
        from bioattn.kernels import _conv_cy as _impl
    except ImportError:
        from bioattn.kernels import _conv_py as _impl

BACKEND = _impl.BACKEND
conv2d_forward = _impl.conv2d_forward
conv2d_backward = _impl.conv2d_backward
