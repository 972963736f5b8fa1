"""Differentiable primitives: convolution, elementwise ops, resampling,
pixel shuffle, and the two training losses.

Conventions fixed here and relied on by the rest of the package:
  - conv2d is cross-correlation (no kernel flip), zero padding;
  - relu subgradient at 0 is 0, likewise the l1 subgradient at equality;
  - bilinear_upsample uses the align-corners-false source mapping
    src = (dst + 0.5) / scale - 0.5, clamped to the valid range;
  - adaptive_avg_pool2d cell (i, j) averages the half-open window
    [floor(i*H/bh), floor((i+1)*H/bh)) x [floor(j*W/bw), floor((j+1)*W/bw)).
"""

import numpy as np

from . import kernels
from .errors import DimensionError, DomainError
from .tensor import Tensor, make_output


def _require_nchw(t, name):
    if t.data.ndim != 4:
        raise DimensionError(f"{name} must be NCHW (4 axes), got {t.data.ndim} axes")


# ---------------------------------------------------------------------------
# convolution

def conv2d(x, w, b=None, stride=1, padding=0):
    """2D cross-correlation of NCHW input with OIKK weights.

    Output shape (N, O, (H+2p-K)//s+1, (W+2p-K)//s+1); differentiable with
    respect to input, weight, and bias.
    """
    _require_nchw(x, "conv2d input")
    _require_nchw(w, "conv2d weight")
    n, c, h, wid = x.shape
    o, ci, k, k2 = w.shape
    if ci != c:
        raise DimensionError(f"conv2d: input has {c} channels but weight expects {ci}")
    if k != k2:
        raise DimensionError(f"conv2d: kernel must be square, got {k}x{k2}")
    if stride < 1 or padding < 0:
        raise DimensionError(f"conv2d: stride must be >=1 and padding >=0, got {stride}, {padding}")
    oh = (h + 2 * padding - k) // stride + 1
    ow = (wid + 2 * padding - k) // stride + 1
    if oh < 1 or ow < 1:
        raise DimensionError(f"conv2d: output extent {oh}x{ow} < 1 for input {h}x{wid}, kernel {k}")
    if b is not None and b.shape != (o,):
        raise DimensionError(f"conv2d: bias shape {b.shape} != ({o},)")

    out = kernels.conv2d_forward(x.data, w.data, stride, padding)
    if b is not None:
        out = out + b.data.reshape(1, o, 1, 1)

    xd, wd = x.data, w.data

    def backward_fn(g):
        gx = kernels.conv2d_backward_input(g, wd, xd.shape, stride, padding)
        gw = kernels.conv2d_backward_weight(g, xd, wd.shape, stride, padding)
        gb = g.sum(axis=(0, 2, 3)) if b is not None else None
        return (gx, gw, gb) if b is not None else (gx, gw)

    parents = (x, w) if b is None else (x, w, b)
    return make_output(out, "conv2d", parents, backward_fn)


# ---------------------------------------------------------------------------
# elementwise

def relu(x):
    mask = x.data > 0

    def backward_fn(g):
        return (g * mask,)

    return make_output(np.where(mask, x.data, 0), "relu", (x,), backward_fn)


def add(x, y):
    if x.shape != y.shape:
        raise DimensionError(f"add: shapes {x.shape} and {y.shape} differ")

    def backward_fn(g):
        return (g, g)

    return make_output(x.data + y.data, "add", (x, y), backward_fn)


def scalar_mul(x, alpha):
    alpha = float(alpha)

    def backward_fn(g):
        return (alpha * g,)

    return make_output(alpha * x.data, "scalar_mul", (x,), backward_fn)


def concat_channels(tensors):
    """Stack NCHW tensors along the channel axis, in argument order."""
    tensors = list(tensors)
    first = tensors[0]
    for t in tensors[1:]:
        same = (t.shape[0], t.shape[2], t.shape[3]) == (first.shape[0], first.shape[2], first.shape[3])
        if t.data.ndim != 4 or not same:
            raise DimensionError(
                f"concat_channels: N/H/W must match, got {t.shape} vs {first.shape}"
            )
    widths = [t.shape[1] for t in tensors]
    offsets = np.cumsum([0] + widths)

    def backward_fn(g):
        return tuple(g[:, offsets[i] : offsets[i + 1]] for i in range(len(widths)))

    data = np.concatenate([t.data for t in tensors], axis=1)
    return make_output(data, "concat_channels", tuple(tensors), backward_fn)


def sigmoid(x):
    xd = x.data
    s = np.where(xd >= 0, 1.0 / (1.0 + np.exp(-np.abs(xd))), np.exp(-np.abs(xd)) / (1.0 + np.exp(-np.abs(xd))))
    s = s.astype(xd.dtype)

    def backward_fn(g):
        return (g * s * (1.0 - s),)

    return make_output(s, "sigmoid", (x,), backward_fn)


def clamp01(x):
    """Clamp to [0,1]; gradient passes only strictly inside the interval."""
    mask = (x.data > 0) & (x.data < 1)

    def backward_fn(g):
        return (g * mask,)

    return make_output(np.clip(x.data, 0.0, 1.0), "clamp01", (x,), backward_fn)


def tsum(x):
    """Sum of all elements as a scalar tensor."""
    shape, dtype = x.data.shape, x.data.dtype

    def backward_fn(g):
        return (np.broadcast_to(g, shape).astype(dtype, copy=True),)

    return make_output(x.data.sum(), "sum", (x,), backward_fn)


# ---------------------------------------------------------------------------
# resampling: shared axis-matrix machinery
#
# Pooling, bilinear interpolation and reflect padding are all separable
# linear maps, applied as  out = My @ x @ Mx^T  over the spatial axes,
# with exact transpose backward  gx = My^T @ g @ Mx.

def _apply_axis_matrices(x, my, mx):
    t = np.matmul(x, mx.T)
    return np.matmul(my, t)


def _axis_matrix_op(x, my, mx, tag):
    out = _apply_axis_matrices(x.data, my, mx)

    def backward_fn(g):
        return (_apply_axis_matrices(g, my.T, mx.T),)

    return make_output(out, tag, (x,), backward_fn)


def _pool_matrix(n, bins, dtype):
    m = np.zeros((bins, n), dtype=dtype)
    for i in range(bins):
        lo = (i * n) // bins
        hi = ((i + 1) * n) // bins
        m[i, lo:hi] = 1.0 / (hi - lo)
    return m


def adaptive_avg_pool2d(x, bins):
    _require_nchw(x, "adaptive_avg_pool2d input")
    bh, bw = bins
    n, c, h, w = x.shape
    if bh > h or bw > w:
        raise DimensionError(f"adaptive_avg_pool2d: bins ({bh},{bw}) exceed extent ({h},{w})")
    my = _pool_matrix(h, bh, x.dtype)
    mx = _pool_matrix(w, bw, x.dtype)
    return _axis_matrix_op(x, my, mx, "adaptive_avg_pool2d")


def _bilinear_matrix(n_in, n_out, dtype):
    m = np.zeros((n_out, n_in), dtype=np.float64)
    scale = n_in / n_out
    for i in range(n_out):
        src = (i + 0.5) * scale - 0.5
        src = min(max(src, 0.0), n_in - 1.0)
        i0 = int(np.floor(src))
        i1 = min(i0 + 1, n_in - 1)
        f = src - i0
        m[i, i0] += 1.0 - f
        m[i, i1] += f
    return m.astype(dtype)


def bilinear_upsample(x, out_hw):
    _require_nchw(x, "bilinear_upsample input")
    oh, ow = out_hw
    if oh < 1 or ow < 1:
        raise DimensionError(f"bilinear_upsample: target extent ({oh},{ow}) must be >= 1")
    my = _bilinear_matrix(x.shape[2], oh, x.dtype)
    mx = _bilinear_matrix(x.shape[3], ow, x.dtype)
    return _axis_matrix_op(x, my, mx, "bilinear_upsample")


def _reflect_matrix(n, pad, dtype):
    # bottom/right-only reflect padding without repeating the border sample
    if pad > n - 1:
        raise DimensionError(f"reflect pad {pad} too large for extent {n}")
    m = np.zeros((n + pad, n), dtype=dtype)
    for i in range(n):
        m[i, i] = 1.0
    for j in range(pad):
        m[n + j, n - 2 - j] = 1.0
    return m


def pad2d_reflect(x, pad_bottom, pad_right):
    """Reflect-pad the bottom/right spatial borders."""
    _require_nchw(x, "pad2d_reflect input")
    if pad_bottom == 0 and pad_right == 0:
        return x
    my = _reflect_matrix(x.shape[2], pad_bottom, x.dtype)
    mx = _reflect_matrix(x.shape[3], pad_right, x.dtype)
    return _axis_matrix_op(x, my, mx, "pad2d_reflect")


def crop2d(x, h, w):
    """Keep the top-left h x w spatial window."""
    _require_nchw(x, "crop2d input")
    n, c, xh, xw = x.shape
    if h > xh or w > xw:
        raise DimensionError(f"crop2d: target ({h},{w}) exceeds extent ({xh},{xw})")
    if h == xh and w == xw:
        return x

    def backward_fn(g):
        gx = np.zeros((n, c, xh, xw), dtype=g.dtype)
        gx[:, :, :h, :w] = g
        return (gx,)

    return make_output(np.ascontiguousarray(x.data[:, :, :h, :w]), "crop2d", (x,), backward_fn)


# ---------------------------------------------------------------------------
# pixel shuffle

def pixel_shuffle(x, r):
    """Rearrange (N, C*r^2, H, W) -> (N, C, rH, rW); bijective, hence the
    gradient is the inverse shuffle."""
    _require_nchw(x, "pixel_shuffle input")
    n, c, h, w = x.shape
    if c % (r * r) != 0:
        raise DimensionError(f"pixel_shuffle: channels {c} not divisible by r^2 = {r * r}")
    co = c // (r * r)

    def fwd(a):
        t = a.reshape(n, co, r, r, h, w)
        t = t.transpose(0, 1, 4, 2, 5, 3)
        return np.ascontiguousarray(t.reshape(n, co, h * r, w * r))

    def backward_fn(g):
        t = g.reshape(n, co, h, r, w, r)
        t = t.transpose(0, 1, 3, 5, 2, 4)
        return (np.ascontiguousarray(t.reshape(n, c, h, w)),)

    return make_output(fwd(x.data), "pixel_shuffle", (x,), backward_fn)


# ---------------------------------------------------------------------------
# losses

def l1_loss(pred, target):
    """Mean absolute difference; subgradient 0 where pred == target."""
    if pred.shape != target.shape:
        raise DimensionError(f"l1_loss: shapes {pred.shape} and {target.shape} differ")
    diff = pred.data - target.data
    n = diff.size

    def backward_fn(g):
        gp = g * np.sign(diff) / n
        return (gp.astype(diff.dtype), (-gp).astype(diff.dtype))

    return make_output(np.abs(diff).mean(), "l1_loss", (pred, target), backward_fn)


def bce_with_logits(logits, target):
    """Mean binary cross entropy on raw logits, computed in the stable form
    max(x,0) - t*x + log(1+exp(-|x|))."""
    if logits.shape != target.shape:
        raise DimensionError(f"bce_with_logits: shapes {logits.shape} and {target.shape} differ")
    t = target.data
    if t.min() < 0 or t.max() > 1:
        raise DomainError(f"bce_with_logits: targets must lie in [0,1], got [{t.min()}, {t.max()}]")
    x = logits.data
    per_elem = np.maximum(x, 0) - t * x + np.log1p(np.exp(-np.abs(x)))
    n = x.size

    def backward_fn(g):
        s = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
        gl = (g * (s - t) / n).astype(x.dtype)
        gt = (g * (-x) / n).astype(x.dtype)
        return (gl, gt)

    return make_output(per_elem.mean(), "bce_with_logits", (logits, target), backward_fn)
