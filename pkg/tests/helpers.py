"""Synthetic fixtures shared by the test modules.

Images are deterministic functions of a seed and already snapped to the
8-bit grid, so PNG round trips are exact and every oracle sees the same
pixels the code under test sees.
"""

import numpy as np

from edgesr.image import ImageBuffer, quantize01


def smooth_image(seed=0, n=64):
    """Low-frequency gradients plus one soft disc; easy to overfit."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:n, 0:n] / (n - 1)
    cy, cx = rng.uniform(0.3, 0.7, size=2)
    r = np.sqrt((yy - cy) ** 2 + (xx - cx) ** 2)
    disc = np.clip((0.22 - r) * 18, 0, 1)
    phase = rng.uniform(0, 2 * np.pi, size=3)
    planes = np.stack([
        0.25 + 0.5 * xx + 0.09 * np.sin(3 * np.pi * yy + phase[0]),
        0.30 + 0.4 * yy + 0.30 * disc,
        0.50 + 0.12 * np.cos(2 * np.pi * xx + phase[1]) + 0.2 * disc,
    ])
    return quantize01(ImageBuffer(np.clip(planes, 0, 1).astype(np.float32)))


def shape_image(seed=0, n=64):
    """Flat background with filled rectangles and discs: crisp step edges."""
    rng = np.random.default_rng(seed)
    img = np.full((3, n, n), rng.uniform(0.1, 0.35, size=(3, 1, 1)), dtype=np.float32)
    for _ in range(3):
        color = rng.uniform(0.55, 0.95, size=3).astype(np.float32)
        if rng.integers(0, 2) == 0:
            x0, y0 = rng.integers(4, n - 24, size=2)
            w, h = rng.integers(10, 20, size=2)
            img[:, y0 : y0 + h, x0 : x0 + w] = color.reshape(3, 1, 1)
        else:
            cy, cx = rng.integers(14, n - 14, size=2)
            rad = int(rng.integers(6, 12))
            yy, xx = np.mgrid[0:n, 0:n]
            mask = (yy - cy) ** 2 + (xx - cx) ** 2 <= rad ** 2
            img[:, mask] = color.reshape(3, 1)
    return quantize01(ImageBuffer(np.clip(img, 0, 1)))


def noise_image(seed=0, n=24, channels=3):
    rng = np.random.default_rng(seed)
    return quantize01(ImageBuffer(rng.uniform(size=(channels, n, n)).astype(np.float32)))
