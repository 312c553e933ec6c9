"""Backend selection for the hot stencil and constitutive kernels.

The compiled module is used when it imports; otherwise the numpy fallback is.
Set ``WESTERVELT_KERNELS=python`` to force the fallback (``=compiled`` makes a
missing extension an error).
"""
import os

import numpy as np

from . import _pykernels

_choice = os.environ.get("WESTERVELT_KERNELS", "auto").lower()

try:
    from . import _ckernels
except ImportError:
    _ckernels = None

if _choice == "python" or _ckernels is None:
    if _choice == "compiled":
        raise ImportError("WESTERVELT_KERNELS=compiled but westervelt._ckernels is not built")
    _impl = _pykernels
    BACKEND = "python"
else:
    _impl = _ckernels
    BACKEND = "compiled"

BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    BACKENDS["compiled"] = _ckernels


def _collapse(shape3, axis):
    """Equivalent ``(shape, axis)`` whose innermost loop runs over contiguous memory.

    The axis is isolated as ``(outer, n, inner)``; when nothing lies inside it
    the view becomes ``(1, outer, n)`` and the difference runs along the last axis.
    """
    outer = int(np.prod(shape3[:axis]))
    inner = int(np.prod(shape3[axis + 1:]))
    if inner == 1:
        return (1, outer, shape3[axis]), 2
    return (outer, shape3[axis], inner), 1


def _diff(name, u, shape3, axis, impl):
    impl = impl or _impl
    shape, ax = _collapse(tuple(shape3), axis)
    out = np.empty(shape)
    getattr(impl, name)(np.ascontiguousarray(u, dtype=np.float64).reshape(shape), ax, out)
    return out.reshape(-1)


def diff_forward(u, shape3, axis, impl=None):
    """Periodic forward difference of a flat vector laid out as ``shape3``."""
    return _diff("diff_forward", u, shape3, axis, impl)


def diff_backward(u, shape3, axis, impl=None):
    """Periodic backward difference ``u[i-1] - u[i]``, the transpose of :func:`diff_forward`."""
    return _diff("diff_backward", u, shape3, axis, impl)


def density_from_pressure(p, k, vol, impl=None):
    impl = impl or _impl
    p = np.ascontiguousarray(p, dtype=np.float64)
    out = np.empty_like(p)
    impl.density_from_pressure(p, float(k), float(vol), out)
    return out


def pressure_from_density(rho, k, vol, impl=None):
    """Return ``(p, bad)`` where ``bad`` is the first failing index or -1."""
    impl = impl or _impl
    rho = np.ascontiguousarray(rho, dtype=np.float64)
    out = np.empty_like(rho)
    bad = impl.pressure_from_density(rho, float(k), float(vol), out)
    return out, bad
