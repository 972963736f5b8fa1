"""Edge detection network: five-stage dense-residual backbone, densely
fused side outputs upsampled by pyramid pooling + pixel shuffle, short
connections from deeper sides into shallower ones, and a learned fusion.

Two branches share the architecture but never parameters: the classifier
ends in a sigmoid and trains against binary edges with BCE; the regressor
is read through a [0,1] clamp and trains against blurred soft edges with
l1 (on the raw output, so the clamp cannot zero the gradient at init).

Inputs of any extent >= the reflect-padding limit are handled by padding
bottom/right to the next multiple of 16 and cropping the output back.
"""

from dataclasses import dataclass, replace

import numpy as np

from . import blocks, ops
from .edges import canny, gaussian_blur
from .errors import DimensionError, DomainError
from .image import ImageBuffer, image_to_tensor, luma_plane
from .tensor import no_grad

N_STAGES = 5
PAD_MULTIPLE = 16  # four stride-2 reductions


@dataclass
class EdgeNetConfig:
    nr: int = 8
    stage_mults: tuple = (1, 2, 4, 8, 8)
    complexities: tuple = (4, 8, 16)
    side_width: int = 4
    side_bins: tuple = (1, 2, 3, 6)
    gt_sigma: float = 1.0
    canny_sigma: float = 1.0
    canny_low: float = 0.1
    canny_high: float = 0.3

    def validate(self):
        if len(self.stage_mults) != N_STAGES:
            raise DomainError(f"stage_mults must have {N_STAGES} entries, got {len(self.stage_mults)}")
        if not self.complexities or list(self.complexities) != sorted(self.complexities):
            raise DomainError(f"complexities must be nonempty ascending, got {self.complexities}")
        if self.side_width % len(self.side_bins) != 0:
            raise DimensionError(
                f"side_width {self.side_width} must divide into {len(self.side_bins)} pyramid branches"
            )
        if self.gt_sigma <= 0:
            raise DomainError(f"gt_sigma must be > 0, got {self.gt_sigma}")
        return self

    def stage_widths(self):
        return [self.nr * m for m in self.stage_mults]

    def at_complexity(self, nr):
        return replace(self, nr=nr)


def build_edge_params(cfg: EdgeNetConfig, seed=0):
    """Parameters for one (complexity, branch) model at width cfg.nr."""
    cfg.validate()
    rng = np.random.default_rng(seed)
    widths = cfg.stage_widths()
    sw = cfg.side_width
    params = {}
    blocks.add_conv(params, rng, "stem", 3, widths[0], 3)
    for c in range(N_STAGES):
        wc = widths[c]
        if c > 0:
            blocks.add_conv(params, rng, f"stage{c}.down", widths[c - 1], wc, 3)
        # block0 sees the stage input alone; block1 additionally sees it as
        # a dense prior, so its projection takes 2*wc channels.
        blocks.add_conv(params, rng, f"stage{c}.block0.proj", wc, wc, 1)
        blocks.add_res_block(params, rng, f"stage{c}.block0", wc)
        blocks.add_conv(params, rng, f"stage{c}.block1.proj", 2 * wc, wc, 1)
        blocks.add_res_block(params, rng, f"stage{c}.block1", wc)
    for c in range(N_STAGES):
        blocks.add_conv(params, rng, f"side{c}.proj", widths[c], sw, 1)
        blocks.add_conv(params, rng, f"side{c}.fuse", sw + c, sw, 1)
        for j in range(c):
            blocks.add_pyramid(params, rng, f"side{c}.up{j}.pyr", sw, cfg.side_bins)
            blocks.add_conv(params, rng, f"side{c}.up{j}.conv", sw, 4 * sw, 3)
        blocks.add_conv(params, rng, f"side{c}.out", sw, 1, 1)
    for c in range(N_STAGES - 1):
        # short connection: starts as a pass-through of the shallow side
        blocks.add_conv(params, rng, f"short{c}", 1 + (N_STAGES - 1 - c), 1, 1)
        wshort = np.zeros_like(params[f"short{c}.w"].data)
        wshort[0, 0, 0, 0] = 1.0
        params[f"short{c}.w"].data = wshort
    # final fusion starts as the arithmetic mean of the refined sides
    blocks.add_conv(params, rng, "fuse_final", N_STAGES, 1, 1)
    params["fuse_final.w"].data = np.full_like(params["fuse_final.w"].data, 1.0 / N_STAGES)
    return params


def dense_res_block(params, prefix, x, prior_feats):
    """1x1-project concat(x, priors) to the block width, then a residual
    conv pair on the projection."""
    inp = x if not prior_feats else ops.concat_channels([x] + list(prior_feats))
    p = blocks.conv(params, prefix + ".proj", inp)
    t = blocks.conv(params, prefix + ".c1", p)
    t = ops.relu(t)
    t = blocks.conv(params, prefix + ".c2", t)
    return ops.add(p, t)


def backbone(x, cfg, params):
    """Image tensor -> five stage features at extents H/2^c, widths nr*mult."""
    h, w = x.shape[2], x.shape[3]
    if h % PAD_MULTIPLE or w % PAD_MULTIPLE:
        raise DimensionError(
            f"backbone input {h}x{w} must be divisible by {PAD_MULTIPLE}; pad and crop at the caller"
        )
    feats = []
    t = blocks.conv(params, "stem", x)
    for c in range(N_STAGES):
        if c > 0:
            t = blocks.conv(params, f"stage{c}.down", t, stride=2)
        stage_in = t
        b0 = dense_res_block(params, f"stage{c}.block0", stage_in, [])
        t = dense_res_block(params, f"stage{c}.block1", b0, [stage_in])
        feats.append(t)
    return feats


def side_output(params, cfg, c, stage_feat, earlier_sides, out_hw):
    """One-channel logit map at out_hw from stage c's feature, with earlier
    side outputs (already at out_hw) fused in at the stage's extent."""
    s = blocks.conv(params, f"side{c}.proj", stage_feat)
    if earlier_sides:
        hw = (stage_feat.shape[2], stage_feat.shape[3])
        downs = [ops.bilinear_upsample(e, hw) for e in earlier_sides]
        s = ops.concat_channels([s] + downs)
    s = blocks.conv(params, f"side{c}.fuse", s)
    for j in range(c):
        s = blocks.pyramid_pool_block(params, f"side{c}.up{j}.pyr", s, cfg.side_bins, clip_bins=True)
        s = blocks.conv(params, f"side{c}.up{j}.conv", s)
        s = ops.pixel_shuffle(s, 2)
    if (s.shape[2], s.shape[3]) != tuple(out_hw):
        s = ops.bilinear_upsample(s, out_hw)
    return blocks.conv(params, f"side{c}.out", s)


def short_connection_fuse(params, sides):
    """Refine each side with all deeper sides; the deepest passes through."""
    refined = []
    for c in range(len(sides)):
        if c == len(sides) - 1:
            refined.append(sides[c])
        else:
            cat = ops.concat_channels([sides[c]] + sides[c + 1:])
            refined.append(blocks.conv(params, f"short{c}", cat))
    return refined


def fuse_final(params, refined_sides):
    return blocks.conv(params, "fuse_final", ops.concat_channels(refined_sides))


def edge_logits(x, cfg, params):
    """Full forward to a single logit map, same extent as the input tensor."""
    h, w = x.shape[2], x.shape[3]
    ph = (-h) % PAD_MULTIPLE
    pw = (-w) % PAD_MULTIPLE
    t = ops.pad2d_reflect(x, ph, pw)
    out_hw = (h + ph, w + pw)
    feats = backbone(t, cfg, params)
    sides = []
    for c in range(N_STAGES):
        sides.append(side_output(params, cfg, c, feats[c], sides[:c], out_hw))
    fused = fuse_final(params, short_connection_fuse(params, sides))
    return ops.crop2d(fused, h, w)


def dense_edge_forward(x, branch, cfg, params):
    """Logits through the branch's output map: sigmoid for the classifier,
    [0,1] clamp for the regressor."""
    logits = edge_logits(x, cfg, params)
    if branch == "classifier":
        return ops.sigmoid(logits)
    if branch == "regressor":
        return ops.clamp01(logits)
    raise DomainError(f"branch must be 'classifier' or 'regressor', got {branch!r}")


# ---------------------------------------------------------------------------
# fusion and targets (plain arrays, no autodiff)

def _check_extents(maps):
    first = maps[0]
    for m in maps[1:]:
        if m.shape != first.shape:
            raise DimensionError(f"edge map extents differ: {m.shape} vs {first.shape}")


def branch_average(class_map, regr_map):
    _check_extents([class_map, regr_map])
    return (class_map + regr_map) / 2.0


def multi_complexity_fuse(maps):
    maps = list(maps)
    if not maps:
        raise DimensionError("multi_complexity_fuse: no maps to fuse")
    _check_extents(maps)
    return np.mean(maps, axis=0)


def make_edge_target(hr: ImageBuffer, cfg: EdgeNetConfig):
    """(binary, soft) training targets from an HR image.

    Binary edges come from Canny on the luma plane with thresholds relative
    to the gradient peak; the soft target is the blurred binary map rescaled
    so the strongest response is exactly 1.
    """
    y = luma_plane(hr) / 255.0
    binary = canny(y, cfg.canny_sigma, cfg.canny_low, cfg.canny_high, relative=True)
    binary = binary.astype(np.float32)
    soft = gaussian_blur(binary.astype(np.float64), cfg.gt_sigma)
    peak = soft.max()
    if peak > 0:
        soft = soft / peak
    return binary, soft.astype(np.float32)


# ---------------------------------------------------------------------------
# ensemble

@dataclass
class EdgeEnsemble:
    """Trained (config, classifier params, regressor params) triples, one
    per complexity, fused by branch- then complexity-averaging."""

    members: list

    def predict(self, img: ImageBuffer) -> ImageBuffer:
        x = image_to_tensor(img)
        fused = []
        with no_grad():
            for cfg, cls_params, reg_params in self.members:
                cmap = dense_edge_forward(x, "classifier", cfg, cls_params)
                rmap = dense_edge_forward(x, "regressor", cfg, reg_params)
                fused.append(branch_average(cmap.data[0, 0], rmap.data[0, 0]))
        return ImageBuffer(multi_complexity_fuse(fused).astype(np.float32))
