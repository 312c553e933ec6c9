# cython: language_level=3
"""Compiled periodic stencil and constitutive kernels.

Every routine mirrors one in ``_pykernels`` operation for operation, so the
two backends produce bitwise-identical results.
"""
from libc.math cimport sqrt

ctypedef double f8


def diff_forward(const f8[:, :, ::1] u, int axis, f8[:, :, ::1] out):
    """out[i] = u[i+1] - u[i] along ``axis`` with periodic wrap."""
    cdef Py_ssize_t n0 = u.shape[0], n1 = u.shape[1], n2 = u.shape[2]
    cdef Py_ssize_t i, j, k, ip
    if axis == 0:
        for i in range(n0):
            ip = i + 1 if i + 1 < n0 else 0
            for j in range(n1):
                for k in range(n2):
                    out[i, j, k] = u[ip, j, k] - u[i, j, k]
    elif axis == 1:
        for i in range(n0):
            for j in range(n1):
                ip = j + 1 if j + 1 < n1 else 0
                for k in range(n2):
                    out[i, j, k] = u[i, ip, k] - u[i, j, k]
    else:
        for i in range(n0):
            for j in range(n1):
                for k in range(n2 - 1):
                    out[i, j, k] = u[i, j, k + 1] - u[i, j, k]
                out[i, j, n2 - 1] = u[i, j, 0] - u[i, j, n2 - 1]


def diff_backward(const f8[:, :, ::1] u, int axis, f8[:, :, ::1] out):
    """out[i] = u[i-1] - u[i] along ``axis``; the transpose of diff_forward."""
    cdef Py_ssize_t n0 = u.shape[0], n1 = u.shape[1], n2 = u.shape[2]
    cdef Py_ssize_t i, j, k, im
    if axis == 0:
        for i in range(n0):
            im = i - 1 if i > 0 else n0 - 1
            for j in range(n1):
                for k in range(n2):
                    out[i, j, k] = u[im, j, k] - u[i, j, k]
    elif axis == 1:
        for i in range(n0):
            for j in range(n1):
                im = j - 1 if j > 0 else n1 - 1
                for k in range(n2):
                    out[i, j, k] = u[i, im, k] - u[i, j, k]
    else:
        for i in range(n0):
            for j in range(n1):
                out[i, j, 0] = u[i, j, n2 - 1] - u[i, j, 0]
                for k in range(1, n2):
                    out[i, j, k] = u[i, j, k - 1] - u[i, j, k]


def density_from_pressure(const f8[::1] p, f8 k, f8 vol, f8[::1] out):
    cdef Py_ssize_t i, n = p.shape[0]
    for i in range(n):
        out[i] = vol * ((1.0 - k * p[i]) * p[i])


def pressure_from_density(const f8[::1] rho, f8 k, f8 vol, f8[::1] out):
    """Negative-branch inverse of the constitutive map.

    Returns the first index whose discriminant is negative, or -1.
    """
    cdef Py_ssize_t i, n = rho.shape[0]
    cdef f8 q, disc
    if k == 0.0:
        for i in range(n):
            out[i] = rho[i] / vol
        return -1
    for i in range(n):
        q = rho[i] / vol
        disc = 1.0 - 4.0 * k * q
        if not disc >= 0.0:
            return i
        out[i] = (2.0 * q) / (1.0 + sqrt(disc))
    return -1
