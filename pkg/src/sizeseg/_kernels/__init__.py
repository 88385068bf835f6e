"""Kernel backend selection.

The compiled Cython core is preferred when it imported cleanly; the
pure-NumPy backend is the fallback.  ``SIZESEG_KERNELS=python`` or
``=compiled`` forces a choice (forcing ``compiled`` raises if the
extension is unavailable, rather than silently degrading).

Dispatch is per operation: the sparse scatter-add (``edge_matvec``)
comes from the selected backend because the compiled loop beats
``np.add.at`` by an order of magnitude, while the 3x3 convolutions
always use the im2col + BLAS matmul path, which outruns a plain
compiled loop at every size we care about (see benchmarks/).
"""

import os

from . import numpy_backend

_requested = os.environ.get("SIZESEG_KERNELS", "").strip().lower()

if _requested == "python":
    _impl = numpy_backend
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]
    except ImportError:
        if _requested == "compiled":
            raise ImportError(
                "SIZESEG_KERNELS=compiled but sizeseg._kernels._core is not "
                "built; run `python setup.py build_ext --inplace`"
            )
        _impl = numpy_backend

BACKEND = _impl.NAME

conv3x3_forward = numpy_backend.conv3x3_forward
conv3x3_backward = numpy_backend.conv3x3_backward
edge_matvec = _impl.edge_matvec


def available_backends():
    """Names of importable backends, fallback first."""
    names = ["python"]
    try:
        from . import _core  # noqa: F401
        names.append("compiled")
    except ImportError:
        pass
    return names


def get_backend(name):
    """Return the backend module for an explicit name ('python'/'compiled')."""
    if name == "python":
        return numpy_backend
    if name == "compiled":
        from . import _core
        return _core
    raise ValueError(f"unknown kernel backend {name!r}")
