# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled convolution core: single-pass C im2col/col2im plus BLAS matmul.

The numpy fallback reaches the same GEMM through stride tricks and
tensordot, which materializes a strided 6-d copy and transposes the
result; here the column matrix is written once by a C loop in the exact
GEMM layout and the product lands directly in the output buffer.  The
accumulation order is fixed, so results are reproducible run to run on a
given installation.  Zero padding, cross-correlation convention (no kernel
flip), NCHW/OIKK layouts, float32 or float64.
"""

import numpy as np

cimport cython

ctypedef fused real:
    float
    double


cdef inline Py_ssize_t _lo(Py_ssize_t pad, Py_ssize_t k, Py_ssize_t stride) nogil:
    # smallest output index o with o*stride - pad + k >= 0
    if pad <= k:
        return 0
    return (pad - k + stride - 1) // stride


cdef inline Py_ssize_t _hi(Py_ssize_t extent, Py_ssize_t pad, Py_ssize_t k,
                           Py_ssize_t stride, Py_ssize_t out_extent) nogil:
    # largest output index o with o*stride - pad + k <= extent - 1
    cdef Py_ssize_t num = extent - 1 + pad - k
    if num < 0:
        return -1
    num = num // stride
    if num > out_extent - 1:
        return out_extent - 1
    return num


cdef void _im2col(real[:, :, :, ::1] x, Py_ssize_t n, Py_ssize_t K,
                  Py_ssize_t stride, Py_ssize_t padding,
                  Py_ssize_t OH, Py_ssize_t OW, real[:, ::1] cols) nogil:
    # cols[(c*K + ky)*K + kx, oy*OW + ox] = padded x[n, c, oy*s - p + ky, ox*s - p + kx]
    cdef Py_ssize_t C = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t c, ky, kx, oy, ox, iy, row, base
    cdef Py_ssize_t oy_lo, oy_hi, ox_lo, ox_hi
    for c in range(C):
        for ky in range(K):
            oy_lo = _lo(padding, ky, stride)
            oy_hi = _hi(H, padding, ky, stride, OH)
            for kx in range(K):
                ox_lo = _lo(padding, kx, stride)
                ox_hi = _hi(W, padding, kx, stride, OW)
                row = (c * K + ky) * K + kx
                for oy in range(OH):
                    base = oy * OW
                    iy = oy * stride - padding + ky
                    if oy < oy_lo or oy > oy_hi:
                        for ox in range(OW):
                            cols[row, base + ox] = 0
                        continue
                    for ox in range(ox_lo):
                        cols[row, base + ox] = 0
                    for ox in range(ox_lo, ox_hi + 1):
                        cols[row, base + ox] = x[n, c, iy, ox * stride - padding + kx]
                    for ox in range(ox_hi + 1, OW):
                        cols[row, base + ox] = 0


cdef void _col2im_add(real[:, ::1] cols, Py_ssize_t n, Py_ssize_t K,
                      Py_ssize_t stride, Py_ssize_t padding,
                      Py_ssize_t OH, Py_ssize_t OW, real[:, :, :, ::1] gx) nogil:
    # scatter-add the valid entries of cols back onto image n (padding rows drop)
    cdef Py_ssize_t C = gx.shape[1], H = gx.shape[2], W = gx.shape[3]
    cdef Py_ssize_t c, ky, kx, oy, ox, iy, row, base
    cdef Py_ssize_t oy_lo, oy_hi, ox_lo, ox_hi
    for c in range(C):
        for ky in range(K):
            oy_lo = _lo(padding, ky, stride)
            oy_hi = _hi(H, padding, ky, stride, OH)
            for kx in range(K):
                ox_lo = _lo(padding, kx, stride)
                ox_hi = _hi(W, padding, kx, stride, OW)
                row = (c * K + ky) * K + kx
                for oy in range(oy_lo, oy_hi + 1):
                    base = oy * OW
                    iy = oy * stride - padding + ky
                    for ox in range(ox_lo, ox_hi + 1):
                        gx[n, c, iy, ox * stride - padding + kx] += cols[row, base + ox]


def conv2d_forward(real[:, :, :, ::1] x, real[:, :, :, ::1] w,
                   Py_ssize_t stride, Py_ssize_t padding):
    cdef Py_ssize_t N = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t O = w.shape[0], K = w.shape[2]
    cdef Py_ssize_t OH = (H + 2 * padding - K) // stride + 1
    cdef Py_ssize_t OW = (W + 2 * padding - K) // stride + 1
    cdef Py_ssize_t n

    dtype = np.float32 if real is float else np.float64
    out_arr = np.empty((N, O, OH, OW), dtype=dtype)
    cols_arr = np.empty((C * K * K, OH * OW), dtype=dtype)
    cdef real[:, ::1] cols = cols_arr

    w2d = np.asarray(w).reshape(O, C * K * K)
    out3 = out_arr.reshape(N, O, OH * OW)
    for n in range(N):
        _im2col(x, n, K, stride, padding, OH, OW, cols)
        np.matmul(w2d, cols_arr, out=out3[n])
    return out_arr


def conv2d_backward_input(real[:, :, :, ::1] grad_out, real[:, :, :, ::1] w,
                          x_shape, Py_ssize_t stride, Py_ssize_t padding):
    cdef Py_ssize_t N = x_shape[0], C = x_shape[1]
    cdef Py_ssize_t O = w.shape[0], K = w.shape[2]
    cdef Py_ssize_t OH = grad_out.shape[2], OW = grad_out.shape[3]
    cdef Py_ssize_t n

    dtype = np.float32 if real is float else np.float64
    gx_arr = np.zeros(tuple(x_shape), dtype=dtype)
    cols_arr = np.empty((C * K * K, OH * OW), dtype=dtype)
    cdef real[:, ::1] cols = cols_arr
    cdef real[:, :, :, ::1] gx = gx_arr

    wT = np.ascontiguousarray(np.asarray(w).reshape(O, C * K * K).T)
    g3 = np.asarray(grad_out).reshape(N, O, OH * OW)
    for n in range(N):
        np.matmul(wT, g3[n], out=cols_arr)
        _col2im_add(cols, n, K, stride, padding, OH, OW, gx)
    return gx_arr


def conv2d_backward_weight(real[:, :, :, ::1] grad_out, real[:, :, :, ::1] x,
                           w_shape, Py_ssize_t stride, Py_ssize_t padding):
    cdef Py_ssize_t N = x.shape[0], C = x.shape[1]
    cdef Py_ssize_t O = w_shape[0], K = w_shape[2]
    cdef Py_ssize_t OH = grad_out.shape[2], OW = grad_out.shape[3]
    cdef Py_ssize_t n

    dtype = np.float32 if real is float else np.float64
    gw2 = np.zeros((O, C * K * K), dtype=dtype)
    cols_arr = np.empty((C * K * K, OH * OW), dtype=dtype)
    cdef real[:, ::1] cols = cols_arr

    g3 = np.asarray(grad_out).reshape(N, O, OH * OW)
    for n in range(N):
        _im2col(x, n, K, stride, padding, OH, OW, cols)
        gw2 += g3[n] @ cols_arr.T
    return gw2.reshape(tuple(w_shape))
