# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; same signatures and semantics as ``_pykernels``."""
from cython.parallel import prange
from libc.math cimport log, sqrt

NAME = "cython"


def lap_nodes(const double[:, ::1] u, const long long[::1] nodes, const long long[::1] offs,
              double inv_h2, double[:, ::1] out):
    cdef Py_ssize_t m = u.shape[0], n = nodes.shape[0], i, c, j
    cdef long long p
    cdef double acc
    for i in range(n):
        p = nodes[i]
        for c in range(m):
            acc = u[c, p + offs[0]]
            for j in range(1, 8):
                acc = acc + u[c, p + offs[j]]
            out[c, p] = (acc - 8.0 * u[c, p]) * inv_h2


def tension_nodes(const double[:, ::1] u, const long long[::1] nodes, const long long[::1] offs,
                  double inv_h2, double[:, ::1] a_c, double[::1] s_c, double[:, ::1] tau_c):
    cdef Py_ssize_t m = u.shape[0], n = nodes.shape[0], i, c, j
    cdef long long p
    cdef double acc, dot
    for i in range(n):
        p = nodes[i]
        dot = 0.0
        for c in range(m):
            acc = u[c, p + offs[0]]
            for j in range(1, 8):
                acc = acc + u[c, p + offs[j]]
            acc = (acc - 8.0 * u[c, p]) * inv_h2
            a_c[c, i] = acc
            dot = dot + u[c, p] * acc
        s_c[i] = dot
        for c in range(m):
            tau_c[c, i] = a_c[c, i] - dot * u[c, p]


def intrinsic_grad(const double[:, ::1] u, const double[:, ::1] a_c, const double[::1] s_c,
                   const double[:, ::1] tau_c, const double[::1] wl_c, const long long[::1] lap,
                   const long long[::1] free, const long long[::1] free_pos,
                   const long long[::1] offs, double inv_h2, double[:, ::1] H, double[:, ::1] g_c):
    cdef Py_ssize_t m = u.shape[0], i, c, j, q
    cdef long long p
    cdef double cc, half_w, acc
    for i in range(lap.shape[0]):
        p = lap[i]
        half_w = 0.5 * wl_c[i]
        cc = 0.0
        for c in range(m):
            cc = cc + half_w * tau_c[c, i] * u[c, p]
        for c in range(m):
            H[c, p] = half_w * tau_c[c, i] - cc * u[c, p]
    for i in range(free.shape[0]):
        p = free[i]
        q = free_pos[i]
        half_w = 0.5 * wl_c[q]
        cc = 0.0
        for c in range(m):
            cc = cc + half_w * tau_c[c, q] * u[c, p]
        for c in range(m):
            acc = H[c, p + offs[0]]
            for j in range(1, 8):
                acc = acc + H[c, p + offs[j]]
            acc = (acc - 8.0 * H[c, p]) * inv_h2
            g_c[c, i] = acc - cc * a_c[c, q] - s_c[q] * (half_w * tau_c[c, q])
    for i in range(lap.shape[0]):
        p = lap[i]
        for c in range(m):
            H[c, p] = 0.0


def tangent_nodes(const double[:, ::1] u, const double[:, ::1] g_c, const long long[::1] nodes,
                  double[:, ::1] out_c):
    cdef Py_ssize_t m = u.shape[0], i, c
    cdef long long p
    cdef double dot
    for i in range(nodes.shape[0]):
        p = nodes[i]
        dot = 0.0
        for c in range(m):
            dot = dot + g_c[c, i] * u[c, p]
        for c in range(m):
            out_c[c, i] = g_c[c, i] - dot * u[c, p]


def project_step(const double[:, ::1] u, const double[:, ::1] d_c, const long long[::1] nodes,
                 double dt, double[:, ::1] out):
    cdef Py_ssize_t m = u.shape[0], i, c
    cdef long long p
    cdef double nrm, y
    for i in range(nodes.shape[0]):
        p = nodes[i]
        nrm = 0.0
        for c in range(m):
            y = u[c, p] - dt * d_c[c, i]
            out[c, p] = y
            nrm = nrm + y * y
        nrm = sqrt(nrm)
        for c in range(m):
            out[c, p] = out[c, p] / nrm


def green_sum(const double[:, ::1] tx, const double[:, ::1] sx, const double[::1] coef,
              double c, const long long[::1] self_index, double[::1] out, int nthreads=1):
    cdef Py_ssize_t T = tx.shape[1], S = sx.shape[1], t, j
    cdef double x0, x1, x2, x3, xx, d0, d1, d2, d3, dd, q, acc, yy, dot
    for t in prange(T, nogil=True, num_threads=nthreads, schedule="static"):
        x0 = tx[0, t]
        x1 = tx[1, t]
        x2 = tx[2, t]
        x3 = tx[3, t]
        xx = x0 * x0 + x1 * x1 + x2 * x2 + x3 * x3
        acc = 0.0
        for j in range(S):
            if j == self_index[t]:
                continue
            d0 = x0 - sx[0, j]
            d1 = x1 - sx[1, j]
            d2 = x2 - sx[2, j]
            d3 = x3 - sx[3, j]
            dd = d0 * d0 + d1 * d1 + d2 * d2 + d3 * d3
            yy = sx[0, j] * sx[0, j] + sx[1, j] * sx[1, j] + sx[2, j] * sx[2, j] + sx[3, j] * sx[3, j]
            dot = x0 * sx[0, j] + x1 * sx[1, j] + x2 * sx[2, j] + x3 * sx[3, j]
            q = xx * yy - 2.0 * dot + 1.0
            acc = acc + coef[j] * (0.5 * log(dd / q) - dd / (2.0 * q) + 0.5)
        out[t] = c * acc


def gradsq_nodes(const double[:, ::1] u, const long long[:, :, ::1] cols,
                 const double[:, :, ::1] coef, double[::1] out):
    """``out[i] = sum_{k, c} (sum_j coef[k, j, i] u[c, cols[k, j, i]])^2``."""
    cdef Py_ssize_t m = u.shape[0], n = out.shape[0], i, k, c
    cdef double acc, d
    for i in range(n):
        acc = 0.0
        for k in range(4):
            for c in range(m):
                d = (coef[k, 0, i] * u[c, cols[k, 0, i]] + coef[k, 1, i] * u[c, cols[k, 1, i]]
                     + coef[k, 2, i] * u[c, cols[k, 2, i]])
                acc = acc + d * d
        out[i] = acc


def intrinsic_change(const double[:, ::1] u, const double[:, ::1] v, const long long[::1] lap,
                     const long long[::1] offs, double inv_h2, const double[::1] s_c,
                     const double[:, ::1] tau_c, const double[:, ::1] a2_c,
                     const double[:, ::1] tau2_c, const double[::1] wl_c):
    cdef Py_ssize_t m = u.shape[0], n = lap.shape[0], i, c, j
    cdef long long p
    cdef double acc, ds, node, total = 0.0
    cdef double ld[8]
    cdef double d[8]
    if m > 8:
        raise ValueError("at most 8 components")
    for i in range(n):
        p = lap[i]
        ds = 0.0
        for c in range(m):
            acc = v[c, p + offs[0]] - u[c, p + offs[0]]
            for j in range(1, 8):
                acc = acc + (v[c, p + offs[j]] - u[c, p + offs[j]])
            d[c] = v[c, p] - u[c, p]
            ld[c] = (acc - 8.0 * d[c]) * inv_h2
            ds = ds + d[c] * a2_c[c, i] + u[c, p] * ld[c]
        node = 0.0
        for c in range(m):
            node = node + (ld[c] - ds * v[c, p] - s_c[i] * d[c]) * (tau_c[c, i] + tau2_c[c, i])
        total = total + wl_c[i] * node
    return 0.25 * total
