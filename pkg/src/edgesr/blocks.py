"""Shared network building blocks: conv parameter init, residual blocks,
and the pyramid pooling block used by both upsampler heads.

Parameters live in flat ``name -> Tensor`` dicts.  Builders append entries
under a dotted prefix; forward helpers look them up by the same prefix, so
a whole network is one dict that serializes directly to a checkpoint.
"""

import math

import numpy as np

from . import ops
from .errors import DimensionError
from .tensor import Tensor


def kaiming_uniform(rng, c_in: int, c_out: int, k: int):
    """Uniform(-b, b) with b = 1/sqrt(fan_in) (kaiming with leaky-relu
    gain).  The relu-gain variant sqrt(6/fan_in) compounds variance through
    stacked residual/dense blocks and saturates the deep stages at init."""
    fan_in = c_in * k * k
    bound = 1.0 / math.sqrt(fan_in)
    w = rng.uniform(-bound, bound, size=(c_out, c_in, k, k))
    return w.astype(np.float32)


def add_conv(params, rng, name, c_in, c_out, k):
    """Register a conv layer's weight and zero bias under ``name``."""
    params[name + ".w"] = Tensor(kaiming_uniform(rng, c_in, c_out, k), requires_grad=True)
    params[name + ".b"] = Tensor(np.zeros(c_out, dtype=np.float32), requires_grad=True)


def conv(params, name, x, stride=1):
    """Apply the conv registered under ``name``; padding is k//2 so odd
    kernels preserve extent at stride 1."""
    w = params[name + ".w"]
    k = w.data.shape[2]
    return ops.conv2d(x, w, params[name + ".b"], stride=stride, padding=k // 2)


def add_res_block(params, rng, prefix, width):
    add_conv(params, rng, prefix + ".c1", width, width, 3)
    add_conv(params, rng, prefix + ".c2", width, width, 3)


def res_block(params, prefix, x, res_scale=1.0):
    """conv -> relu -> conv with an additive skip; no normalization."""
    t = conv(params, prefix + ".c1", x)
    t = ops.relu(t)
    t = conv(params, prefix + ".c2", t)
    if res_scale != 1.0:
        t = ops.scalar_mul(t, res_scale)
    return ops.add(x, t)


def add_pyramid(params, rng, prefix, width, bins):
    """Pyramid pooling parameters: one 1x1 conv per bin plus the fusion conv."""
    if width % len(bins) != 0:
        raise DimensionError(
            f"pyramid pooling: width {width} not divisible by {len(bins)} branches"
        )
    branch_c = width // len(bins)
    for i in range(len(bins)):
        add_conv(params, rng, f"{prefix}.branch{i}", width, branch_c, 1)
    add_conv(params, rng, f"{prefix}.fuse", 2 * width, width, 1)


def pyramid_pool_block(params, prefix, x, bins, clip_bins=False):
    """Adaptive-pool each bin, 1x1 conv, resize back, concat with the input,
    fuse with a 1x1 conv back to the input width.

    With ``clip_bins`` a bin larger than the spatial extent is clamped to it
    (branch convs are 1x1, so parameter shapes do not depend on the bin);
    without it, an oversized bin is a dimension error.
    """
    n, c, h, w = x.shape
    feats = [x]
    for i, b in enumerate(bins):
        bb = (min(b, h), min(b, w)) if clip_bins else (b, b)
        p = ops.adaptive_avg_pool2d(x, bb)
        p = conv(params, f"{prefix}.branch{i}", p)
        p = ops.bilinear_upsample(p, (h, w))
        feats.append(p)
    cat = ops.concat_channels(feats)
    return conv(params, f"{prefix}.fuse", cat)


def param_count(params) -> int:
    return sum(int(p.data.size) for p in params.values())
