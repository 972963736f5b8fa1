"""Pure-numpy convolution kernels (fallback backend).

All three routines use an im2col view built with ``sliding_window_view`` and
reduce with ``tensordot`` so the heavy lifting lands in BLAS.  Zero padding,
cross-correlation convention (no kernel flip), NCHW/OIKK layouts.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _pad(x, padding):
    if padding == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))


def _windows(x, k, stride):
    # (N, C, OH, OW, K, K) view over the padded input
    w = sliding_window_view(x, (k, k), axis=(2, 3))
    return w[:, :, ::stride, ::stride]


def conv2d_forward(x, w, stride, padding):
    k = w.shape[2]
    cols = _windows(_pad(x, padding), k, stride)
    out = np.tensordot(cols, w, axes=([1, 4, 5], [1, 2, 3]))  # (N, OH, OW, O)
    return np.ascontiguousarray(out.transpose(0, 3, 1, 2))


def conv2d_backward_input(grad_out, w, x_shape, stride, padding):
    n, c, h, wid = x_shape
    o, _, k, _ = w.shape
    _, _, oh, ow = grad_out.shape
    # scatter grad_out onto a dilated grid, then full-correlate with the
    # spatially flipped kernel (transposed convolution)
    dh = (oh - 1) * stride + 1
    dw = (ow - 1) * stride + 1
    dil = np.zeros((n, o, dh + 2 * (k - 1), dw + 2 * (k - 1)), dtype=grad_out.dtype)
    dil[:, :, k - 1 : k - 1 + dh : stride, k - 1 : k - 1 + dw : stride] = grad_out
    w_flip = w[:, :, ::-1, ::-1]
    cols = sliding_window_view(dil, (k, k), axis=(2, 3))
    gx_full = np.tensordot(cols, w_flip, axes=([1, 4, 5], [0, 2, 3]))  # (N, FH, FW, C)
    gx_full = gx_full.transpose(0, 3, 1, 2)
    # fh = dh + k - 1 rows; the unpadded input occupies [padding, padding + h)
    gx = np.zeros(x_shape, dtype=grad_out.dtype)
    fh, fw = gx_full.shape[2], gx_full.shape[3]
    y0, x0 = padding, padding
    y1, x1 = min(y0 + h, fh), min(x0 + wid, fw)
    gx[:, :, : y1 - y0, : x1 - x0] = gx_full[:, :, y0:y1, x0:x1]
    return gx


def conv2d_backward_weight(grad_out, x, w_shape, stride, padding):
    k = w_shape[2]
    cols = _windows(_pad(x, padding), k, stride)  # (N, C, OH, OW, K, K)
    gw = np.tensordot(grad_out, cols, axes=([0, 2, 3], [0, 2, 3]))  # (O, C, K, K)
    return np.ascontiguousarray(gw)
