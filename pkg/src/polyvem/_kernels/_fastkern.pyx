# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twin of :mod:`polyvem._kernels.reference`.

Same signatures, same semantics; exists because these three loops sit at
the bottom of the per-element pipeline and dominate assembly time on
fine meshes.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def monomial_values(const cnp.int64_t[:, ::1] exps, double cx, double cy,
                    double scale, const double[:, ::1] points):
    cdef Py_ssize_t npts = points.shape[0]
    cdef Py_ssize_t nm = exps.shape[0]
    cdef cnp.ndarray[double, ndim=2] out = np.empty((npts, nm))
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j, p
    cdef double xi, eta, v
    cdef cnp.int64_t a, b
    for i in range(npts):
        xi = (points[i, 0] - cx) / scale
        eta = (points[i, 1] - cy) / scale
        for j in range(nm):
            a = exps[j, 0]
            b = exps[j, 1]
            v = 1.0
            for p in range(a):
                v *= xi
            for p in range(b):
                v *= eta
            o[i, j] = v
    return out


def monomial_gradients(const cnp.int64_t[:, ::1] exps, double cx, double cy,
                       double scale, const double[:, ::1] points):
    cdef Py_ssize_t npts = points.shape[0]
    cdef Py_ssize_t nm = exps.shape[0]
    cdef cnp.ndarray[double, ndim=3] out = np.empty((npts, nm, 2))
    cdef double[:, :, ::1] o = out
    cdef Py_ssize_t i, j, p
    cdef double xi, eta, va, vb, pa, pb
    cdef cnp.int64_t a, b
    for i in range(npts):
        xi = (points[i, 0] - cx) / scale
        eta = (points[i, 1] - cy) / scale
        for j in range(nm):
            a = exps[j, 0]
            b = exps[j, 1]
            # pa = xi^(a-1), va = xi^a (and likewise for eta)
            pa = 1.0
            for p in range(a - 1):
                pa *= xi
            va = pa * xi if a > 0 else 1.0
            pb = 1.0
            for p in range(b - 1):
                pb *= eta
            vb = pb * eta if b > 0 else 1.0
            o[i, j, 0] = (a / scale) * (pa if a > 0 else 0.0) * vb
            o[i, j, 1] = (b / scale) * va * (pb if b > 0 else 0.0)
    return out


def fan_quadrature(const double[:, ::1] verts, const double[::1] center,
                   const double[:, ::1] ref_nodes, const double[::1] ref_weights):
    cdef Py_ssize_t n = verts.shape[0]
    cdef Py_ssize_t q = ref_nodes.shape[0]
    cdef cnp.ndarray[double, ndim=2] nodes = np.empty((n * q, 2))
    cdef cnp.ndarray[double, ndim=1] weights = np.empty(n * q)
    cdef double[:, ::1] nd = nodes
    cdef double[::1] w = weights
    cdef Py_ssize_t i, k, inext
    cdef double e1x, e1y, e2x, e2y, jac, u, v
    for i in range(n):
        inext = i + 1 if i + 1 < n else 0
        e1x = verts[i, 0] - center[0]
        e1y = verts[i, 1] - center[1]
        e2x = verts[inext, 0] - center[0]
        e2y = verts[inext, 1] - center[1]
        jac = e1x * e2y - e1y * e2x
        for k in range(q):
            u = ref_nodes[k, 0]
            v = ref_nodes[k, 1]
            nd[i * q + k, 0] = center[0] + u * e1x + v * e2x
            nd[i * q + k, 1] = center[1] + u * e1y + v * e2y
            w[i * q + k] = jac * ref_weights[k]
    return nodes, weights
