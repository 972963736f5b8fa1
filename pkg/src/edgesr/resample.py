"""Bicubic resampling with the Keys a=-0.5 kernel.

When downscaling, the kernel is widened by the scale ratio and the weights
renormalized per output pixel (antialiasing), the convention under which
"bicubic" degradation is reported across the SR evaluation lineage.  Edge
handling is by coordinate clamping; weights per output pixel sum to 1.
"""

import numpy as np

from .errors import DimensionError
from .image import ImageBuffer


def cubic_kernel(x):
    """Keys cubic with a = -0.5 (vectorized)."""
    a = -0.5
    x = np.abs(np.asarray(x, dtype=np.float64))
    out = np.zeros_like(x)
    near = x <= 1
    far = (x > 1) & (x < 2)
    out[near] = (a + 2) * x[near] ** 3 - (a + 3) * x[near] ** 2 + 1
    out[far] = a * x[far] ** 3 - 5 * a * x[far] ** 2 + 8 * a * x[far] - 4 * a
    return out


def resize_axis_matrix(n_in, n_out):
    """Dense (n_out, n_in) row-stochastic resampling matrix for one axis."""
    scale = n_out / n_in
    kscale = min(scale, 1.0)
    support = 2.0 / kscale
    n_taps = int(np.ceil(2 * support)) + 2
    m = np.zeros((n_out, n_in), dtype=np.float64)
    for i in range(n_out):
        u = (i + 0.5) / scale - 0.5
        left = int(np.floor(u - support)) + 1
        taps = left + np.arange(n_taps)
        w = cubic_kernel((u - taps) * kscale)
        s = w.sum()
        if s != 0:
            w = w / s
        src = np.clip(taps, 0, n_in - 1)
        for j, wj in zip(src, w):
            m[i, j] += wj
    return m


def bicubic_resize(img, out_hw):
    """Resize to (H', W'), clamped to [0,1]; identity when sizes match."""
    oh, ow = out_hw
    if oh < 1 or ow < 1:
        raise DimensionError(f"bicubic_resize: target extent ({oh},{ow}) must be >= 1")
    if (oh, ow) == (img.height, img.width):
        return img
    my = resize_axis_matrix(img.height, oh)
    mx = resize_axis_matrix(img.width, ow)
    planes = img.planes.astype(np.float64)
    out = np.matmul(my, np.matmul(planes, mx.T))
    return ImageBuffer(np.clip(out, 0.0, 1.0).astype(np.float32))


def offset_fix(hr):
    """Resize ground truth to (8*floor(H/8), 8*floor(W/8)).

    Guarantees every downstream x2/x4/x8 LR-HR pair has exactly matching
    integral sizes, so up/downsampling can never drift off the ground-truth
    grid.  Idempotent; identity when the extents are already multiples of 8.
    """
    if hr.height < 8 or hr.width < 8:
        raise DimensionError(f"offset_fix needs at least 8x8, got {hr.height}x{hr.width}")
    return bicubic_resize(hr, (8 * (hr.height // 8), 8 * (hr.width // 8)))


def degrade_pair(hr, scale):
    """Offset-fix the ground truth and bicubic-downsample it by ``scale``."""
    if scale not in (2, 4, 8):
        raise DimensionError(f"degrade_pair: scale must be 2, 4 or 8, got {scale}")
    hr_fixed = offset_fix(hr)
    lr = bicubic_resize(hr_fixed, (hr_fixed.height // scale, hr_fixed.width // scale))
    return lr, hr_fixed
