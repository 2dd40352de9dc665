"""Backend dispatch for the convolution / pooling kernels.

The compiled extension is preferred when it imported cleanly; the numpy
reference implementation is the fallback. `MELMASK_KERNELS=numpy|compiled`
forces a backend, raising if a forced compiled backend is unavailable.
Both backends implement the same contracts (see `_ref`).
"""

import os

from . import _ref

try:
    from . import _opt as _compiled
except ImportError:
    _compiled = None

_forced = os.environ.get("MELMASK_KERNELS", "").strip().lower()
if _forced == "numpy":
    _impl = _ref
elif _forced == "compiled":
    if _compiled is None:
        raise ImportError("MELMASK_KERNELS=compiled but the compiled extension is not built")
    _impl = _compiled
elif _forced:
    raise ImportError(f"unknown MELMASK_KERNELS value {_forced!r}, expected 'numpy' or 'compiled'")
else:
    _impl = _compiled if _compiled is not None else _ref

BACKEND = "compiled" if _impl is _compiled and _compiled is not None else "numpy"

conv2d_forward = _impl.conv2d_forward
conv2d_backward = _impl.conv2d_backward
maxpool2d_forward = _impl.maxpool2d_forward
maxpool2d_backward = _impl.maxpool2d_backward


def available_backends():
    """Names of the kernel backends importable in this environment."""
    names = ["numpy"]
    if _compiled is not None:
        names.append("compiled")
    return names


def get_backend(name):
    """Return the kernel module for `name` regardless of the active default."""
    if name == "numpy":
        return _ref
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernel backend is not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")
