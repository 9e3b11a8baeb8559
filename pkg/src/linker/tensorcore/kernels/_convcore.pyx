# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled conv/pool kernels, channels-first (C, H, W), float64.

Single-threaded on purpose: a fixed accumulation order keeps training
trajectories bit-reproducible. The conv loops sweep one (c, u, v) plane
at a time with the valid output range hoisted out of the inner loops, so
the hot loops run branch-free over contiguous rows.
"""

import numpy as np

cimport numpy as cnp


cdef inline Py_ssize_t _lo(Py_ssize_t off, Py_ssize_t stride) nogil:
    # smallest i >= 0 with i * stride + off >= 0
    cdef Py_ssize_t i = 0
    while i * stride + off < 0:
        i += 1
    return i


cdef inline Py_ssize_t _hi(Py_ssize_t off, Py_ssize_t stride, Py_ssize_t n,
                           Py_ssize_t limit) nogil:
    # largest i <= n - 1 with i * stride + off < limit
    cdef Py_ssize_t i = n - 1
    while i >= 0 and i * stride + off >= limit:
        i -= 1
    return i


def conv2d_fwd(double[:, :, ::1] x, double[:, :, :, ::1] w, int stride, int ph, int pw):
    cdef Py_ssize_t C = x.shape[0], H = x.shape[1], W = x.shape[2]
    cdef Py_ssize_t O = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t Ho = (H + 2 * ph - kh) // stride + 1
    cdef Py_ssize_t Wo = (W + 2 * pw - kw) // stride + 1
    y_arr = np.zeros((O, Ho, Wo))
    cdef double[:, :, ::1] y = y_arr
    cdef Py_ssize_t o, c, i, j, u, v, hi, i0, i1, j0, j1, shift
    cdef double coeff
    cdef double *px
    cdef double *py
    for o in range(O):
        for c in range(C):
            for u in range(kh):
                i0 = _lo(u - ph, stride)
                i1 = _hi(u - ph, stride, Ho, H)
                for v in range(kw):
                    coeff = w[o, c, u, v]
                    j0 = _lo(v - pw, stride)
                    j1 = _hi(v - pw, stride, Wo, W)
                    if stride == 1:
                        # contiguous axpy over each row; SIMD-friendly
                        shift = v - pw
                        for i in range(i0, i1 + 1):
                            px = &x[c, i + u - ph, 0]
                            py = &y[o, i, 0]
                            for j in range(j0, j1 + 1):
                                py[j] += coeff * px[j + shift]
                    else:
                        for i in range(i0, i1 + 1):
                            hi = i * stride + u - ph
                            for j in range(j0, j1 + 1):
                                y[o, i, j] += coeff * x[c, hi, j * stride + v - pw]
    return y_arr


def conv2d_bwd_weight(double[:, :, ::1] x, double[:, :, ::1] gy, int stride,
                      int ph, int pw, int kh, int kw):
    cdef Py_ssize_t C = x.shape[0], H = x.shape[1], W = x.shape[2]
    cdef Py_ssize_t O = gy.shape[0], Ho = gy.shape[1], Wo = gy.shape[2]
    gw_arr = np.zeros((O, C, kh, kw))
    cdef double[:, :, :, ::1] gw = gw_arr
    cdef Py_ssize_t o, c, i, j, u, v, hi, i0, i1, j0, j1, shift
    cdef double acc
    cdef double *px
    cdef double *pg
    for o in range(O):
        for c in range(C):
            for u in range(kh):
                i0 = _lo(u - ph, stride)
                i1 = _hi(u - ph, stride, Ho, H)
                for v in range(kw):
                    j0 = _lo(v - pw, stride)
                    j1 = _hi(v - pw, stride, Wo, W)
                    acc = 0.0
                    if stride == 1:
                        shift = v - pw
                        for i in range(i0, i1 + 1):
                            px = &x[c, i + u - ph, 0]
                            pg = &gy[o, i, 0]
                            for j in range(j0, j1 + 1):
                                acc += pg[j] * px[j + shift]
                    else:
                        for i in range(i0, i1 + 1):
                            hi = i * stride + u - ph
                            for j in range(j0, j1 + 1):
                                acc += gy[o, i, j] * x[c, hi, j * stride + v - pw]
                    gw[o, c, u, v] = acc
    return gw_arr


def conv2d_bwd_input(double[:, :, ::1] gy, double[:, :, :, ::1] w, int stride,
                     int ph, int pw, int h, int wdim):
    cdef Py_ssize_t O = gy.shape[0], Ho = gy.shape[1], Wo = gy.shape[2]
    cdef Py_ssize_t C = w.shape[1], kh = w.shape[2], kw = w.shape[3]
    gx_arr = np.zeros((C, h, wdim))
    cdef double[:, :, ::1] gx = gx_arr
    cdef Py_ssize_t o, c, i, j, u, v, hi, i0, i1, j0, j1, shift
    cdef double coeff
    cdef double *pg
    cdef double *pgx
    for o in range(O):
        for c in range(C):
            for u in range(kh):
                i0 = _lo(u - ph, stride)
                i1 = _hi(u - ph, stride, Ho, h)
                for v in range(kw):
                    coeff = w[o, c, u, v]
                    j0 = _lo(v - pw, stride)
                    j1 = _hi(v - pw, stride, Wo, wdim)
                    if stride == 1:
                        shift = v - pw
                        for i in range(i0, i1 + 1):
                            pgx = &gx[c, i + u - ph, 0]
                            pg = &gy[o, i, 0]
                            for j in range(j0, j1 + 1):
                                pgx[j + shift] += coeff * pg[j]
                    else:
                        for i in range(i0, i1 + 1):
                            hi = i * stride + u - ph
                            for j in range(j0, j1 + 1):
                                gx[c, hi, j * stride + v - pw] += coeff * gy[o, i, j]
    return gx_arr


def maxpool2d_fwd(double[:, :, ::1] x, int k, int stride):
    cdef Py_ssize_t C = x.shape[0], H = x.shape[1], W = x.shape[2]
    cdef Py_ssize_t Ho = (H - k) // stride + 1
    cdef Py_ssize_t Wo = (W - k) // stride + 1
    y_arr = np.empty((C, Ho, Wo))
    idx_arr = np.empty((C, Ho, Wo), dtype=np.int64)
    cdef double[:, :, ::1] y = y_arr
    cdef long long[:, :, ::1] idx = idx_arr
    cdef Py_ssize_t c, i, j, u, v, hi, wj, best_h, best_w
    cdef double best, val
    for c in range(C):
        for i in range(Ho):
            for j in range(Wo):
                best = -1e308
                best_h = 0
                best_w = 0
                for u in range(k):
                    hi = i * stride + u
                    for v in range(k):
                        wj = j * stride + v
                        val = x[c, hi, wj]
                        if val > best:
                            best = val
                            best_h = hi
                            best_w = wj
                y[c, i, j] = best
                idx[c, i, j] = best_h * W + best_w
    return y_arr, idx_arr


def maxpool2d_bwd(double[:, :, ::1] gy, long long[:, :, ::1] idx, int h, int w):
    cdef Py_ssize_t C = gy.shape[0], Ho = gy.shape[1], Wo = gy.shape[2]
    gx_arr = np.zeros((C, h * w))
    cdef double[:, ::1] gx = gx_arr
    cdef Py_ssize_t c, i, j
    for c in range(C):
        for i in range(Ho):
            for j in range(Wo):
                gx[c, idx[c, i, j]] += gy[c, i, j]
    return gx_arr.reshape(C, h, w)
