# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled pointwise kernels for the cell solvers and the 3D energy quadrature.

Same contracts as ``pykernels``; one symmetric d x d block per point.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def apply_quadform_field(const double[:, :, ::1] q, const double[:, ::1] v):
    cdef Py_ssize_t n = q.shape[0]
    cdef Py_ssize_t d = q.shape[1]
    cdef cnp.ndarray[double, ndim=2] out = np.empty((n, d))
    cdef double[:, ::1] o = out
    cdef Py_ssize_t p, i, j
    cdef double acc
    with nogil:
        for p in range(n):
            for i in range(d):
                acc = 0.0
                for j in range(d):
                    acc += q[p, i, j] * v[p, j]
                o[p, i] = acc
    return out


def quadform_energy(const double[:, :, ::1] q, const double[:, ::1] v, const double[::1] w):
    cdef Py_ssize_t n = q.shape[0]
    cdef Py_ssize_t d = q.shape[1]
    cdef Py_ssize_t p, i, j
    cdef double total = 0.0
    cdef double acc, row
    with nogil:
        for p in range(n):
            acc = 0.0
            for i in range(d):
                row = 0.0
                for j in range(d):
                    row += q[p, i, j] * v[p, j]
                acc += v[p, i] * row
            total += w[p] * acc
    return total


def green_strain_voigt(const double[:, :, ::1] f):
    cdef Py_ssize_t n = f.shape[0]
    cdef cnp.ndarray[double, ndim=2] out = np.empty((n, 6))
    cdef double[:, ::1] o = out
    cdef double s2 = sqrt(2.0)
    cdef Py_ssize_t p, k
    cdef double c00, c11, c22, c12, c02, c01
    with nogil:
        for p in range(n):
            c00 = 0.0
            c11 = 0.0
            c22 = 0.0
            c12 = 0.0
            c02 = 0.0
            c01 = 0.0
            for k in range(3):
                c00 += f[p, k, 0] * f[p, k, 0]
                c11 += f[p, k, 1] * f[p, k, 1]
                c22 += f[p, k, 2] * f[p, k, 2]
                c12 += f[p, k, 1] * f[p, k, 2]
                c02 += f[p, k, 0] * f[p, k, 2]
                c01 += f[p, k, 0] * f[p, k, 1]
            o[p, 0] = 0.5 * (c00 - 1.0)
            o[p, 1] = 0.5 * (c11 - 1.0)
            o[p, 2] = 0.5 * (c22 - 1.0)
            o[p, 3] = 0.5 * s2 * c12
            o[p, 4] = 0.5 * s2 * c02
            o[p, 5] = 0.5 * s2 * c01
    return out
