# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled float32 im2col / col2im kernels (hot path of conv layers)."""

import numpy as np
cimport numpy as cnp

cnp.import_array()

BACKEND_NAME = "fast"


def im2col(cnp.ndarray x_in, int kh, int kw, int sh, int sw, int ph, int pw):
    cdef cnp.ndarray[cnp.float32_t, ndim=4] x = np.ascontiguousarray(x_in, dtype=np.float32)
    cdef int b = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3]
    cdef int ho = (h + 2 * ph - kh) // sh + 1
    cdef int wo = (w + 2 * pw - kw) // sw + 1
    cdef cnp.ndarray[cnp.float32_t, ndim=3] cols = np.zeros(
        (b, c * kh * kw, ho * wo), dtype=np.float32)
    cdef float[:, :, :, :] xv = x
    cdef float[:, :, :] cv = cols
    cdef int bi, ci, u, v, i, j, hi, wi, row
    with nogil:
        for bi in range(b):
            for ci in range(c):
                for u in range(kh):
                    for v in range(kw):
                        row = (ci * kh + u) * kw + v
                        for i in range(ho):
                            hi = i * sh - ph + u
                            if hi < 0 or hi >= h:
                                continue
                            for j in range(wo):
                                wi = j * sw - pw + v
                                if 0 <= wi < w:
                                    cv[bi, row, i * wo + j] = xv[bi, ci, hi, wi]
    return cols


def col2im(cnp.ndarray cols_in, int c, int h, int w,
           int kh, int kw, int sh, int sw, int ph, int pw):
    cdef cnp.ndarray[cnp.float32_t, ndim=3] cols = np.ascontiguousarray(
        cols_in, dtype=np.float32)
    cdef int b = cols.shape[0]
    cdef int ho = (h + 2 * ph - kh) // sh + 1
    cdef int wo = (w + 2 * pw - kw) // sw + 1
    cdef cnp.ndarray[cnp.float32_t, ndim=4] x = np.zeros((b, c, h, w), dtype=np.float32)
    cdef float[:, :, :] cv = cols
    cdef float[:, :, :, :] xv = x
    cdef int bi, ci, u, v, i, j, hi, wi, row
    with nogil:
        for bi in range(b):
            for ci in range(c):
                for u in range(kh):
                    for v in range(kw):
                        row = (ci * kh + u) * kw + v
                        for i in range(ho):
                            hi = i * sh - ph + u
                            if hi < 0 or hi >= h:
                                continue
                            for j in range(wo):
                                wi = j * sw - pw + v
                                if 0 <= wi < w:
                                    xv[bi, ci, hi, wi] += cv[bi, row, i * wo + j]
    return x
