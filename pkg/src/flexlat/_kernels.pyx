# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled edge kernels; see ``_kernels_py`` for the reference semantics."""

from libc.stdint cimport int64_t


def edge_residuals(const double[:, ::1] pos, const double[::1] a, const double[::1] b,
                   const int64_t[:, ::1] edges, const double[::1] target, double[::1] out):
    cdef Py_ssize_t e, j
    cdef int64_t u, v, m, k
    cdef double d, acc
    for e in range(edges.shape[0]):
        u = edges[e, 0]
        v = edges[e, 1]
        m = edges[e, 2]
        k = edges[e, 3]
        acc = 0.0
        for j in range(3):
            d = pos[v, j] + m * a[j] + k * b[j] - pos[u, j]
            acc += d * d
        out[e] = acc - target[e]


def edge_jacobian(const double[:, ::1] pos, const double[::1] a, const double[::1] b,
                  const int64_t[:, ::1] edges, const int64_t[::1] colmap, double[:, ::1] out):
    """Fill ``out`` (zeroed, shape E x 3n) with gauge-chart derivatives."""
    cdef Py_ssize_t e, j
    cdef Py_ssize_t ncol = out.shape[1]
    cdef Py_ssize_t ca1 = ncol - 3
    cdef int64_t u, v, m, k, cu, cv
    cdef double d[3]
    for e in range(edges.shape[0]):
        u = edges[e, 0]
        v = edges[e, 1]
        m = edges[e, 2]
        k = edges[e, 3]
        for j in range(3):
            d[j] = pos[v, j] + m * a[j] + k * b[j] - pos[u, j]
        if u != v:
            cu = colmap[u]
            cv = colmap[v]
            if cv >= 0:
                for j in range(3):
                    out[e, cv + j] += 2.0 * d[j]
            if cu >= 0:
                for j in range(3):
                    out[e, cu + j] -= 2.0 * d[j]
        out[e, ca1] = 2.0 * m * d[0]
        out[e, ca1 + 1] = 2.0 * k * d[0]
        out[e, ca1 + 2] = 2.0 * k * d[1]
