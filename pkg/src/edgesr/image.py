"""Planar floating-point images in [0,1] plus 8-bit PNG I/O.

``ImageBuffer`` carries 1 or 3 planes in (C, H, W) order.  Edge maps are
single-plane buffers.  PNG is the only codec: samples map to [0,1] by /255
on load and round-half-up x255 on save; alpha is stripped with a warning.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import DimensionError
from .tensor import Tensor


@dataclass
class ImageBuffer:
    """1- or 3-plane float32 image, values in [0,1], planes (C, H, W)."""

    planes: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.planes, dtype=np.float32)
        if a.ndim == 2:
            a = a[None]
        if a.ndim != 3 or a.shape[0] not in (1, 3):
            raise DimensionError(f"ImageBuffer needs (C,H,W) with C in {{1,3}}, got {a.shape}")
        self.planes = a

    @property
    def channels(self):
        return self.planes.shape[0]

    @property
    def height(self):
        return self.planes.shape[1]

    @property
    def width(self):
        return self.planes.shape[2]

    def plane(self):
        """The single plane of a 1-channel buffer."""
        if self.channels != 1:
            raise DimensionError(f"plane() needs a 1-channel buffer, got {self.channels}")
        return self.planes[0]

    def clamped(self):
        return ImageBuffer(np.clip(self.planes, 0.0, 1.0))


# EdgeMap is a single-plane ImageBuffer; soft maps are in [0,1], Canny
# ground truth is binary {0,1}.
EdgeMap = ImageBuffer


def rgb_to_y(img):
    """BT.601 studio-swing luma on the 0-255 scale (black 16, white 235)."""
    if img.channels != 3:
        raise DimensionError(f"rgb_to_y needs 3 channels, got {img.channels}")
    r, g, b = img.planes.astype(np.float64)
    return 16.0 + 65.481 * r + 128.553 * g + 24.966 * b


def luma_plane(img):
    """Metric plane on the 0-255 scale: BT.601 luma for RGB, plain x255
    for single-plane buffers."""
    if img.channels == 3:
        return rgb_to_y(img)
    return img.plane().astype(np.float64) * 255.0


def load_png(path):
    with Image.open(path) as im:
        mode = im.mode
        if mode in ("RGBA", "LA", "PA", "P"):
            if "A" in mode or (mode == "P" and "transparency" in im.info):
                warnings.warn(f"{path}: alpha channel stripped on load")
            im = im.convert("RGB")
            mode = "RGB"
        if mode == "L":
            arr = np.asarray(im, dtype=np.float32) / 255.0
            return ImageBuffer(arr[None])
        if mode != "RGB":
            im = im.convert("RGB")
        arr = np.asarray(im, dtype=np.float32) / 255.0
        return ImageBuffer(arr.transpose(2, 0, 1))


def to_uint8(planes):
    """[0,1] floats -> uint8 with round-half-up."""
    return np.clip(np.floor(planes * 255.0 + 0.5), 0, 255).astype(np.uint8)


def save_png(img, path):
    arr = to_uint8(img.planes)
    if img.channels == 1:
        Image.fromarray(arr[0], mode="L").save(path, format="PNG")
    else:
        Image.fromarray(arr.transpose(1, 2, 0), mode="RGB").save(path, format="PNG")


def quantize01(img):
    """Snap samples to the 8-bit grid; equals a save/load round trip."""
    return ImageBuffer(to_uint8(img.planes).astype(np.float32) / 255.0)


def image_to_tensor(img):
    """(C,H,W) buffer -> (1,C,H,W) Tensor."""
    return Tensor(img.planes[None].copy())


def tensor_to_image(t, clamp=True):
    """(1,C,H,W) Tensor -> ImageBuffer, clamped to [0,1] for export."""
    data = t.data if isinstance(t, Tensor) else np.asarray(t)
    if data.ndim != 4 or data.shape[0] != 1:
        raise DimensionError(f"tensor_to_image needs (1,C,H,W), got {data.shape}")
    planes = data[0].astype(np.float32)
    if clamp:
        planes = np.clip(planes, 0.0, 1.0)
    return ImageBuffer(planes)
