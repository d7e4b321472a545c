"""Backend selection for the hot kernels.

The compiled ``_ckernels`` extension is used when it was built; otherwise
the numpy implementations in ``_pykernels`` are used. Setting the
environment variable ``HARVSENSE_KERNELS=python`` forces the fallback.
"""

import os

from . import _pykernels

BACKENDS = {"python": _pykernels}

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None
else:
    BACKENDS["cython"] = _ckernels

_requested = os.environ.get("HARVSENSE_KERNELS", "").strip().lower()
if _requested and _requested not in ("python", "cython"):
    raise ImportError(f"HARVSENSE_KERNELS must be 'python' or 'cython', got {_requested!r}")
if _requested == "cython" and _ckernels is None:
    raise ImportError("HARVSENSE_KERNELS=cython but the compiled extension is not built")

BACKEND = _requested or ("cython" if _ckernels is not None else "python")
_impl = BACKENDS[BACKEND]

fresnel_cs = _impl.fresnel_cs
moving_variance = _impl.moving_variance
im2col1d = _impl.im2col1d
col2im1d = _impl.col2im1d
maxpool1d_forward = _impl.maxpool1d_forward
maxpool1d_backward = _impl.maxpool1d_backward

__all__ = [
    "BACKEND",
    "BACKENDS",
    "fresnel_cs",
    "moving_variance",
    "im2col1d",
    "col2im1d",
    "maxpool1d_forward",
    "maxpool1d_backward",
]
