"""Y-channel PSNR and SSIM.

Both metrics run on the BT.601 luma plane (0-255 scale).  PSNR crops a
border of ``scale`` pixels per side before the mean-squared error; identical
inputs return the +inf sentinel (serialized as "inf" in reports).  SSIM uses
the 11x11 Gaussian window, sigma 1.5, C1=(0.01*255)^2, C2=(0.03*255)^2,
averaged over valid windows only.
"""

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionError
from .image import luma_plane


def _check_same_size(a, b):
    if (a.height, a.width, a.channels) != (b.height, b.width, b.channels):
        raise DimensionError(
            f"images differ: {a.channels}x{a.height}x{a.width} vs {b.channels}x{b.height}x{b.width}"
        )


def psnr(a, b, scale):
    """Peak signal-to-noise ratio in dB on luma, border-cropped by ``scale``."""
    _check_same_size(a, b)
    ya = luma_plane(a)
    yb = luma_plane(b)
    if scale > 0:
        if 2 * scale >= min(ya.shape):
            raise DimensionError(f"psnr: border crop {scale} leaves no pixels for {ya.shape}")
        ya = ya[scale:-scale, scale:-scale]
        yb = yb[scale:-scale, scale:-scale]
    mse = np.mean((ya - yb) ** 2)
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(255.0 ** 2 / mse)


def gaussian_window(size=11, sigma=1.5):
    r = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(r ** 2) / (2.0 * sigma ** 2))
    g /= g.sum()
    return np.outer(g, g)


def ssim(a, b):
    """Mean structural similarity over valid 11x11 windows on luma."""
    _check_same_size(a, b)
    ya = luma_plane(a)
    yb = luma_plane(b)
    if min(ya.shape) < 11:
        raise DimensionError(f"ssim needs at least 11x11, got {ya.shape}")
    win = gaussian_window()
    c1 = (0.01 * 255.0) ** 2
    c2 = (0.03 * 255.0) ** 2

    def wmean(x):
        return np.tensordot(sliding_window_view(x, (11, 11)), win, axes=([2, 3], [0, 1]))

    mu_a = wmean(ya)
    mu_b = wmean(yb)
    var_a = wmean(ya * ya) - mu_a * mu_a
    var_b = wmean(yb * yb) - mu_b * mu_b
    cov = wmean(ya * yb) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))
