"""Pure-numpy kernels, used when the compiled extension is unavailable."""
import numpy as np


def diff_forward(u, axis, out):
    n = u.shape[axis]
    lo = [slice(None)] * 3
    hi = [slice(None)] * 3
    lo[axis], hi[axis] = slice(0, n - 1), slice(1, n)
    np.subtract(u[tuple(hi)], u[tuple(lo)], out=out[tuple(lo)])
    first = [slice(None)] * 3
    last = [slice(None)] * 3
    first[axis], last[axis] = slice(0, 1), slice(n - 1, n)
    np.subtract(u[tuple(first)], u[tuple(last)], out=out[tuple(last)])


def diff_backward(u, axis, out):
    n = u.shape[axis]
    lo = [slice(None)] * 3
    hi = [slice(None)] * 3
    lo[axis], hi[axis] = slice(0, n - 1), slice(1, n)
    np.subtract(u[tuple(lo)], u[tuple(hi)], out=out[tuple(hi)])
    first = [slice(None)] * 3
    last = [slice(None)] * 3
    first[axis], last[axis] = slice(0, 1), slice(n - 1, n)
    np.subtract(u[tuple(last)], u[tuple(first)], out=out[tuple(first)])


def density_from_pressure(p, k, vol, out):
    np.multiply(vol, (1.0 - k * p) * p, out=out)


def pressure_from_density(rho, k, vol, out):
    if k == 0.0:
        np.divide(rho, vol, out=out)
        return -1
    q = rho / vol
    disc = 1.0 - 4.0 * k * q
    bad = np.flatnonzero(~(disc >= 0.0))
    if bad.size:
        return int(bad[0])
    np.divide(2.0 * q, 1.0 + np.sqrt(disc), out=out)
    return -1
