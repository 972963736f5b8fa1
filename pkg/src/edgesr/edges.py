"""Classical edge extraction: Gaussian smoothing, Sobel gradients, and a
Canny detector used to synthesize edge ground truth.

Border handling is replicate padding throughout, so constant planes stay
constant and adding a constant to the input never changes gradients (and
therefore never changes Canny output).
"""

import numpy as np

from .errors import DomainError

SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
SOBEL_Y = SOBEL_X.T


def gaussian_blur(plane, sigma):
    """Separable Gaussian, kernel radius ceil(3*sigma), replicate borders."""
    if sigma <= 0:
        raise DomainError(f"gaussian_blur: sigma must be > 0, got {sigma}")
    r = int(np.ceil(3.0 * sigma))
    t = np.arange(-r, r + 1, dtype=np.float64)
    k = np.exp(-(t ** 2) / (2.0 * sigma ** 2))
    k /= k.sum()
    h, w = plane.shape
    p = np.pad(np.asarray(plane, dtype=np.float64), ((r, r), (0, 0)), mode="edge")
    tmp = np.zeros((h, w), dtype=np.float64)
    for i, kv in enumerate(k):
        tmp += kv * p[i : i + h, :]
    p = np.pad(tmp, ((0, 0), (r, r)), mode="edge")
    out = np.zeros((h, w), dtype=np.float64)
    for i, kv in enumerate(k):
        out += kv * p[:, i : i + w]
    return out


def _diff2(plane, axis):
    p = np.pad(plane, ((0, 0), (1, 1)) if axis else ((1, 1), (0, 0)), mode="edge")
    if axis:
        return p[:, 2:] - p[:, :-2]
    return p[2:, :] - p[:-2, :]


def _smooth121(plane, axis):
    p = np.pad(plane, ((0, 0), (1, 1)) if axis else ((1, 1), (0, 0)), mode="edge")
    if axis:
        return p[:, :-2] + 2.0 * p[:, 1:-1] + p[:, 2:]
    return p[:-2, :] + 2.0 * p[1:-1, :] + p[2:, :]


def sobel_gradients(plane):
    """(gx, gy, magnitude) with the standard 3x3 Sobel kernels.

    Computed separably with the difference pass first, so constant planes
    give exactly zero gradients instead of float accumulation residue.
    """
    plane = np.asarray(plane, dtype=np.float64)
    gx = _smooth121(_diff2(plane, axis=1), axis=0)
    gy = _smooth121(_diff2(plane, axis=0), axis=1)
    return gx, gy, np.hypot(gx, gy)


def _nms(mag, gx, gy):
    """Thin ridges to one pixel along the quantized gradient direction.

    Direction is quantized to 4 bins; a pixel survives when its magnitude
    is > the next neighbour and >= the previous one along that direction
    (the asymmetric tie-break keeps exactly one pixel of a two-pixel tie).
    """
    h, w = mag.shape
    angle = np.mod(np.arctan2(gy, gx), np.pi)
    bins = np.floor((angle + np.pi / 8) / (np.pi / 4)).astype(int) % 4
    # bin -> (dy, dx) step: 0 = horizontal gradient, 1 = diagonal down-right,
    # 2 = vertical, 3 = diagonal down-left
    steps = [(0, 1), (1, 1), (1, 0), (1, -1)]
    padded = np.pad(mag, 1, mode="constant")
    out = np.zeros_like(mag)
    for b, (dy, dx) in enumerate(steps):
        sel = bins == b
        nxt = padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
        prv = padded[1 - dy : 1 - dy + h, 1 - dx : 1 - dx + w]
        keep = sel & (mag > nxt) & (mag >= prv)
        out[keep] = mag[keep]
    return out


def _hysteresis(nms, t_low, t_high):
    strong = nms >= t_high
    weak = nms >= t_low
    keep = strong.copy()
    frontier = list(zip(*np.nonzero(strong)))
    h, w = nms.shape
    while frontier:
        y, x = frontier.pop()
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                ny, nx = y + dy, x + dx
                if 0 <= ny < h and 0 <= nx < w and weak[ny, nx] and not keep[ny, nx]:
                    keep[ny, nx] = True
                    frontier.append((ny, nx))
    return keep


def canny(plane, sigma, t_low, t_high, relative=False):
    """Binary edge map: blur -> Sobel -> 4-bin NMS -> dual-threshold linking.

    With ``relative=True`` the thresholds are fractions of the maximum
    gradient magnitude, which makes the detector invariant to affine
    intensity changes.
    """
    if not (0 < t_low < t_high):
        raise DomainError(f"canny: need 0 < t_low < t_high, got {t_low}, {t_high}")
    if sigma <= 0:
        raise DomainError(f"canny: sigma must be > 0, got {sigma}")
    smoothed = gaussian_blur(plane, sigma)
    gx, gy, mag = sobel_gradients(smoothed)
    peak = mag.max()
    if relative:
        if peak == 0:
            return np.zeros(plane.shape, dtype=np.float32)
        t_low, t_high = t_low * peak, t_high * peak
    nms = _nms(mag, gx, gy)
    return _hysteresis(nms, t_low, t_high).astype(np.float32)
