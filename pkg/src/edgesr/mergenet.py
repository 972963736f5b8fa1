"""Merge network: fuses the SR image and its edge map into the final
output through an EDSR-style trunk with a 4-channel head and an additive
edge skip into the residual features.

Spatial extent is never changed; the edge skip is selectable by config so
the with/without ablation runs on the same code path.
"""

from dataclasses import dataclass

import numpy as np

from . import blocks, ops
from .errors import DimensionError, DomainError
from .image import image_to_tensor, tensor_to_image
from .tensor import no_grad


@dataclass
class MergeConfig:
    n_resblocks: int = 4
    n_feats: int = 16
    res_scale: float = 1.0
    use_edge_skip: bool = True

    def validate(self):
        if self.n_resblocks < 1:
            raise DomainError(f"n_resblocks must be >= 1, got {self.n_resblocks}")
        if self.n_feats < 4:
            raise DomainError(f"n_feats must be >= 4, got {self.n_feats}")
        return self


def build_merge_params(cfg: MergeConfig, seed=0):
    cfg.validate()
    rng = np.random.default_rng(seed)
    f = cfg.n_feats
    params = {}
    blocks.add_conv(params, rng, "head", 4, f, 3)
    for i in range(cfg.n_resblocks):
        blocks.add_res_block(params, rng, f"block{i}", f)
    blocks.add_conv(params, rng, "body_tail", f, f, 3)
    if cfg.use_edge_skip:
        blocks.add_conv(params, rng, "edge_skip", 1, f, 3)
    blocks.add_conv(params, rng, "tail", f, 3, 3)
    return params


def edge_skip_embed(edge, params):
    """Lift the 1-channel edge map to n_feats channels with a 3x3 conv."""
    return blocks.conv(params, "edge_skip", edge)


def merge_forward(sr, edge, cfg, params):
    """SR tensor (N,3,H,W) + edge tensor (N,1,H,W) -> (N,3,H,W), unclamped."""
    if (sr.shape[0], sr.shape[2], sr.shape[3]) != (edge.shape[0], edge.shape[2], edge.shape[3]):
        raise DimensionError(f"sr {sr.shape} and edge {edge.shape} extents differ")
    if edge.shape[1] != 1:
        raise DimensionError(f"edge map must have 1 channel, got {edge.shape[1]}")
    x = ops.concat_channels([sr, edge])
    h = blocks.conv(params, "head", x)
    t = h
    for i in range(cfg.n_resblocks):
        t = blocks.res_block(params, f"block{i}", t, cfg.res_scale)
    t = blocks.conv(params, "body_tail", t)
    t = ops.add(t, h)
    if cfg.use_edge_skip:
        t = ops.add(t, edge_skip_embed(edge, params))
    return blocks.conv(params, "tail", t)


def merge_images(sr_img, edge_img, cfg, params):
    """ImageBuffer pair in, clamped ImageBuffer out."""
    if edge_img.planes.shape[0] != 1:
        raise DimensionError(f"edge image must be single-plane, got {edge_img.planes.shape[0]}")
    with no_grad():
        out = merge_forward(image_to_tensor(sr_img), image_to_tensor(edge_img), cfg, params)
    return tensor_to_image(out, clamp=True)
