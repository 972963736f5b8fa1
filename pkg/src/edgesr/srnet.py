"""Super-resolution network: a residual trunk with a long skip, then a
pyramid-pooling block feeding pixel-shuffle upsampling stages.

The upsampler doubles the extent log2(scale) times, so output extents are
exactly scale * input extents for every admissible input.
"""

from dataclasses import dataclass

import numpy as np

from . import blocks, ops
from .errors import DimensionError, DomainError
from .image import image_to_tensor, tensor_to_image
from .tensor import no_grad

_N_UP_STAGES = {2: 1, 4: 2, 8: 3}


@dataclass
class SRConfig:
    scale: int = 2
    n_resblocks: int = 4
    n_feats: int = 16
    res_scale: float = 1.0
    pyramid_bins: tuple = (1, 2, 3, 6)

    def validate(self):
        if self.scale not in _N_UP_STAGES:
            raise DomainError(f"scale must be one of 2, 4, 8; got {self.scale}")
        if self.n_resblocks < 1:
            raise DomainError(f"n_resblocks must be >= 1, got {self.n_resblocks}")
        if self.n_feats % len(self.pyramid_bins) != 0:
            raise DimensionError(
                f"n_feats {self.n_feats} must divide into {len(self.pyramid_bins)} pyramid branches"
            )
        return self


def build_sr_params(cfg: SRConfig, seed=0):
    cfg.validate()
    rng = np.random.default_rng(seed)
    f = cfg.n_feats
    params = {}
    blocks.add_conv(params, rng, "head", 3, f, 3)
    for i in range(cfg.n_resblocks):
        blocks.add_res_block(params, rng, f"block{i}", f)
    blocks.add_conv(params, rng, "body_tail", f, f, 3)
    blocks.add_pyramid(params, rng, "up.pyr", f, cfg.pyramid_bins)
    for j in range(_N_UP_STAGES[cfg.scale]):
        blocks.add_conv(params, rng, f"up.stage{j}", f, 4 * f, 3)
    blocks.add_conv(params, rng, "tail", f, 3, 3)
    return params


def sr_trunk(x, cfg, params):
    """Head conv, residual blocks, body tail conv, long skip back to head."""
    h = blocks.conv(params, "head", x)
    t = h
    for i in range(cfg.n_resblocks):
        t = blocks.res_block(params, f"block{i}", t, cfg.res_scale)
    t = blocks.conv(params, "body_tail", t)
    return ops.add(t, h)


def sr_upsample(t, cfg, params):
    u = blocks.pyramid_pool_block(params, "up.pyr", t, cfg.pyramid_bins)
    for j in range(_N_UP_STAGES[cfg.scale]):
        u = blocks.conv(params, f"up.stage{j}", u)
        u = ops.pixel_shuffle(u, 2)
    return blocks.conv(params, "tail", u)


def sr_forward(x, cfg, params):
    """LR tensor (N,3,H,W) -> SR tensor (N,3,scale*H,scale*W), unclamped."""
    h, w = x.shape[2], x.shape[3]
    if min(h, w) < max(cfg.pyramid_bins):
        raise DimensionError(
            f"input extent {h}x{w} below largest pyramid bin {max(cfg.pyramid_bins)}"
        )
    return sr_upsample(sr_trunk(x, cfg, params), cfg, params)


def edsr_star_forward(lr, cfg, params):
    """ImageBuffer in, clamped ImageBuffer out (export-time clamp only)."""
    with no_grad():
        out = sr_forward(image_to_tensor(lr), cfg, params)
    return tensor_to_image(out, clamp=True)
