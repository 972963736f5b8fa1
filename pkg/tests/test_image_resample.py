"""Image container, PNG I/O, luma, and bicubic resampling.

The resampler is checked against an independently written dense weight
matrix built straight from the kernel definition (expanded polynomial,
clamp-and-accumulate taps, renormalize), not against the implementation's
own tap enumeration.
"""

import numpy as np
import pytest

from edgesr.errors import DimensionError
from edgesr.image import (
    ImageBuffer,
    load_png,
    luma_plane,
    quantize01,
    save_png,
    to_uint8,
)
from edgesr.resample import bicubic_resize, degrade_pair, offset_fix

from helpers import noise_image, smooth_image


# ---------------------------------------------------------------- container


def test_imagebuffer_promotes_2d_to_single_plane():
    buf = ImageBuffer(np.zeros((5, 7), dtype=np.float32))
    assert buf.planes.shape == (1, 5, 7)
    assert (buf.channels, buf.height, buf.width) == (1, 5, 7)


def test_imagebuffer_rejects_bad_channel_count():
    with pytest.raises(DimensionError):
        ImageBuffer(np.zeros((2, 4, 4), dtype=np.float32))
    with pytest.raises(DimensionError):
        ImageBuffer(np.zeros((3, 3, 4, 4), dtype=np.float32))


def test_plane_accessor_requires_single_channel():
    rgb = ImageBuffer(np.zeros((3, 4, 4), dtype=np.float32))
    with pytest.raises(DimensionError):
        rgb.plane()
    gray = ImageBuffer(np.full((1, 4, 4), 0.25, dtype=np.float32))
    assert gray.plane().shape == (4, 4)


# ------------------------------------------------------------------- luma


def test_luma_primary_values():
    def solid(r, g, b):
        planes = np.zeros((3, 2, 2), dtype=np.float32)
        planes[0], planes[1], planes[2] = r, g, b
        return ImageBuffer(planes)

    assert np.allclose(luma_plane(solid(1, 1, 1)), 235.0, atol=1e-4)
    assert np.allclose(luma_plane(solid(0, 0, 0)), 16.0, atol=1e-4)
    assert np.allclose(luma_plane(solid(1, 0, 0)), 81.481, atol=1e-4)
    assert np.allclose(luma_plane(solid(0, 1, 0)), 144.553, atol=1e-4)
    assert np.allclose(luma_plane(solid(0, 0, 1)), 40.966, atol=1e-4)
    # gray: coefficients sum to 219 over the studio-swing range
    assert np.allclose(luma_plane(solid(0.5, 0.5, 0.5)), 16.0 + 219.0 * 0.5, atol=1e-4)


def test_luma_of_single_plane_is_scaled_by_255():
    buf = ImageBuffer(np.full((1, 3, 3), 0.2, dtype=np.float32))
    assert np.allclose(luma_plane(buf), 51.0, atol=1e-4)


# ------------------------------------------------------------------ PNG I/O


def test_to_uint8_rounds_half_up_and_clamps():
    vals = np.array([[-0.1, 0.0, 0.4 / 255, 0.5 / 255, 0.6 / 255, 1.0, 1.3]], dtype=np.float32)
    out = to_uint8(vals)
    assert out.tolist() == [[0, 0, 0, 1, 1, 255, 255]]


def test_png_round_trip_is_exact_for_quantized_rgb(tmp_path):
    img = noise_image(seed=11, n=16)
    path = tmp_path / "t.png"
    save_png(img, path)
    back = load_png(path)
    assert back.planes.shape == img.planes.shape
    assert np.array_equal(back.planes, img.planes)


def test_png_round_trip_grayscale(tmp_path):
    img = noise_image(seed=12, n=9, channels=1)
    path = tmp_path / "g.png"
    save_png(img, path)
    back = load_png(path)
    assert back.channels == 1
    assert np.array_equal(back.planes, img.planes)


def test_quantize01_equals_save_load(tmp_path):
    rng = np.random.default_rng(13)
    img = ImageBuffer(rng.random((3, 12, 10), dtype=np.float32))
    path = tmp_path / "q.png"
    save_png(img, path)
    assert np.array_equal(quantize01(img).planes, load_png(path).planes)


def test_alpha_channel_is_stripped_with_warning(tmp_path):
    from PIL import Image

    rgba = (np.arange(4 * 5 * 6) % 256).astype(np.uint8).reshape(5, 6, 4)
    path = tmp_path / "a.png"
    Image.fromarray(rgba, mode="RGBA").save(path)
    with pytest.warns(UserWarning, match="alpha"):
        img = load_png(path)
    assert img.channels == 3
    assert np.array_equal(to_uint8(img.planes).transpose(1, 2, 0), rgba[:, :, :3])


# --------------------------------------------------- bicubic reference oracle


def _ref_cubic(t):
    # Keys kernel, a = -0.5, written as the expanded polynomials.
    t = abs(float(t))
    if t <= 1.0:
        return 1.5 * t ** 3 - 2.5 * t ** 2 + 1.0
    if t < 2.0:
        return -0.5 * t ** 3 + 2.5 * t ** 2 - 4.0 * t + 2.0
    return 0.0


def _ref_axis_matrix(n_in, n_out):
    """Evaluate the kernel at every candidate source sample, fold clamped
    taps together, renormalize.  Independent of the library's tap windowing."""
    scale = n_out / n_in
    k = min(scale, 1.0)
    reach = int(np.ceil(2.0 / k)) + 2
    m = np.zeros((n_out, n_in))
    for i in range(n_out):
        u = (i + 0.5) / scale - 0.5
        centre = int(np.floor(u))
        weights = {}
        for p in range(centre - reach, centre + reach + 1):
            v = _ref_cubic((u - p) * k)
            if v != 0.0:
                j = min(max(p, 0), n_in - 1)
                weights[j] = weights.get(j, 0.0) + v
        total = sum(weights.values())
        for j, v in weights.items():
            m[i, j] = v / total
    return m


def _ref_resize(img, oh, ow):
    my = _ref_axis_matrix(img.height, oh)
    mx = _ref_axis_matrix(img.width, ow)
    out = my @ img.planes.astype(np.float64) @ mx.T
    return np.clip(out, 0.0, 1.0)


RESIZE_CASES = [
    (16, 16, 32, 32),   # x2 up
    (8, 12, 32, 48),    # x4 up
    (32, 24, 16, 12),   # x2 down
    (32, 40, 4, 5),     # x8 down
    (17, 23, 34, 46),   # odd extents, x2 up
    (24, 24, 3, 3),     # x8 down
    (15, 10, 7, 21),    # shrink one axis, grow the other
    (9, 31, 27, 11),    # non-dyadic ratios
    (40, 8, 5, 64),     # extreme aspect change
    (11, 11, 11, 22),   # identity on one axis
]


@pytest.mark.parametrize("h,w,oh,ow", RESIZE_CASES)
def test_bicubic_matches_dense_reference(h, w, oh, ow):
    rng = np.random.default_rng(h * 1000 + w * 100 + oh * 10 + ow)
    img = ImageBuffer(rng.random((3, h, w), dtype=np.float32))
    got = bicubic_resize(img, (oh, ow)).planes
    want = _ref_resize(img, oh, ow)
    assert got.shape == (3, oh, ow)
    assert np.max(np.abs(got - want)) <= 1e-6


def test_bicubic_identity_when_size_matches():
    img = noise_image(seed=14, n=12)
    assert bicubic_resize(img, (12, 12)) is img


def test_bicubic_preserves_constants():
    img = ImageBuffer(np.full((3, 16, 16), 0.37, dtype=np.float32))
    for hw in [(32, 32), (8, 8), (5, 23)]:
        out = bicubic_resize(img, hw)
        assert np.max(np.abs(out.planes - 0.37)) <= 1e-6


def test_bicubic_reproduces_linear_ramp_interior():
    # cubic convolution with a=-0.5 is exact on affine signals away from
    # the clamped border columns
    n = 24
    ramp = 0.1 + 0.8 * np.arange(n) / (n - 1)
    img = ImageBuffer(np.tile(ramp, (3, n, 1)).astype(np.float32))
    out = bicubic_resize(img, (n, 2 * n)).planes
    u = (np.arange(2 * n) + 0.5) / 2.0 - 0.5
    want = 0.1 + 0.8 * u / (n - 1)
    sl = slice(4, -4)
    assert np.max(np.abs(out[:, :, sl] - want[sl])) <= 1e-6


def test_bicubic_rejects_empty_target():
    img = noise_image(seed=15, n=8)
    with pytest.raises(DimensionError):
        bicubic_resize(img, (0, 8))


# --------------------------------------------------------- degradation chain


def test_offset_fix_floors_to_multiples_of_8():
    img = ImageBuffer(np.random.default_rng(16).random((3, 31, 45), dtype=np.float32))
    fixed = offset_fix(img)
    assert (fixed.height, fixed.width) == (24, 40)
    again = offset_fix(fixed)
    assert again is fixed  # already aligned: identity


def test_offset_fix_rejects_tiny_inputs():
    with pytest.raises(DimensionError):
        offset_fix(ImageBuffer(np.zeros((3, 7, 64), dtype=np.float32)))


@pytest.mark.parametrize("scale", [2, 4, 8])
def test_degrade_pair_alignment(scale):
    hr = smooth_image(seed=17, n=67)
    lr, hr_fixed = degrade_pair(hr, scale)
    assert hr_fixed.height % 8 == 0 and hr_fixed.width % 8 == 0
    assert (lr.height * scale, lr.width * scale) == (hr_fixed.height, hr_fixed.width)


def test_degrade_pair_rejects_other_scales():
    hr = smooth_image(seed=18, n=32)
    with pytest.raises(DimensionError):
        degrade_pair(hr, 3)
