# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops for row shearing, sparse row resampling and patch scatter.

Every function here has a NumPy twin in :mod:`lfaa._kernels_py` with the
same signature; :mod:`lfaa.kernels` picks one at import.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport floor

cnp.import_array()


def shear_rows(const double[:, :, ::1] x, const double[::1] shifts):
    """out[b, s, u] = x[b, s, u + shifts[s]], bilinear, zero outside the row."""
    cdef Py_ssize_t B = x.shape[0], S = x.shape[1], U = x.shape[2]
    cdef Py_ssize_t b, s, u, i0
    cdef double p, f, top = <double>(U - 1)
    out = np.zeros((B, S, U), dtype=np.float64)
    cdef double[:, :, ::1] o = out
    with nogil:
        for b in range(B):
            for s in range(S):
                for u in range(U):
                    p = u + shifts[s]
                    if p < 0.0 or p > top:
                        continue
                    i0 = <Py_ssize_t>floor(p)
                    f = p - i0
                    if i0 >= U - 1:
                        o[b, s, u] = x[b, s, U - 1]
                    else:
                        o[b, s, u] = (1.0 - f) * x[b, s, i0] + f * x[b, s, i0 + 1]
    return out


def shear_rows_adjoint(const double[:, :, ::1] g, const double[::1] shifts):
    """Transpose of :func:`shear_rows` with respect to ``x``."""
    cdef Py_ssize_t B = g.shape[0], S = g.shape[1], U = g.shape[2]
    cdef Py_ssize_t b, s, u, i0
    cdef double p, f, top = <double>(U - 1)
    out = np.zeros((B, S, U), dtype=np.float64)
    cdef double[:, :, ::1] o = out
    with nogil:
        for b in range(B):
            for s in range(S):
                for u in range(U):
                    p = u + shifts[s]
                    if p < 0.0 or p > top:
                        continue
                    i0 = <Py_ssize_t>floor(p)
                    f = p - i0
                    if i0 >= U - 1:
                        o[b, s, U - 1] += g[b, s, u]
                    else:
                        o[b, s, i0] += (1.0 - f) * g[b, s, u]
                        o[b, s, i0 + 1] += f * g[b, s, u]
    return out


def gather_rows(const double[:, ::1] x, const cnp.int64_t[:, ::1] idx,
                const double[:, ::1] w):
    """out[b, o] = sum_t w[o, t] * x[b, idx[o, t]]."""
    cdef Py_ssize_t B = x.shape[0], O = idx.shape[0], T = idx.shape[1]
    cdef Py_ssize_t b, k, t
    cdef double acc
    out = np.empty((B, O), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for b in range(B):
            for k in range(O):
                acc = 0.0
                for t in range(T):
                    acc = acc + w[k, t] * x[b, idx[k, t]]
                o[b, k] = acc
    return out


ctypedef fused real_t:
    float
    double


def col2im(const real_t[:, :, :, :, :, ::1] cols, Py_ssize_t Hp, Py_ssize_t Wp,
           Py_ssize_t sh, Py_ssize_t sw):
    """Scatter-add patches ``cols[n, i, j, c, a, b]`` onto ``out[n, c, i*sh + a, j*sw + b]``."""
    cdef Py_ssize_t N = cols.shape[0], Ho = cols.shape[1], Wo = cols.shape[2]
    cdef Py_ssize_t C = cols.shape[3], kh = cols.shape[4], kw = cols.shape[5]
    cdef Py_ssize_t n, i, j, c, a, b, r
    dtype = np.float32 if real_t is float else np.float64
    out = np.zeros((N, C, Hp, Wp), dtype=dtype)
    cdef real_t[:, :, :, ::1] o = out
    with nogil:
        for n in range(N):
            for i in range(Ho):
                for j in range(Wo):
                    for c in range(C):
                        for a in range(kh):
                            r = i * sh + a
                            for b in range(kw):
                                o[n, c, r, j * sw + b] += cols[n, i, j, c, a, b]
    return out
