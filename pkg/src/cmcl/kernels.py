"""Backend dispatch for the hot numerical kernels.

The compiled extension (built from ``_kernels.pyx``) is preferred when it
imported cleanly; set ``CMCL_PURE_PYTHON=1`` to force the NumPy fallback.
Each backend is individually deterministic; across backends, floating-point
results can differ by a few ulps because summation order differs.
"""

import os

from . import _kernels_py

_impl = _kernels_py
if not os.environ.get("CMCL_PURE_PYTHON"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        pass

BACKEND = "python" if _impl is _kernels_py else "cython"

cast_rays = _impl.cast_rays
scan_loglik = _impl.scan_loglik
point_mixture_density = _impl.point_mixture_density
kt_halve_assign = _impl.kt_halve_assign


def get_backend(name):
    """Return the kernel module for ``name`` in {"auto", "python", "cython"}.

    Used by the backend benchmark; raises if the compiled backend is
    requested but was not built.
    """
    if name == "auto":
        return _impl
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels  # raises ImportError if not built
        return _kernels
    raise ValueError(f"unknown kernel backend {name!r}")
