"""Structural contracts of the three networks: parameter counts from
closed-form expressions, identity/inertness invariants, extent handling,
and the documented initialization of the fusion layers."""

import numpy as np
import pytest

from edgesr import blocks, ops
from edgesr.blocks import param_count
from edgesr.edgenet import (
    N_STAGES,
    EdgeEnsemble,
    EdgeNetConfig,
    backbone,
    build_edge_params,
    dense_edge_forward,
    edge_logits,
    short_connection_fuse,
)
from edgesr.errors import DimensionError, DomainError
from edgesr.image import ImageBuffer
from edgesr.mergenet import MergeConfig, build_merge_params, merge_forward, merge_images
from edgesr.srnet import SRConfig, build_sr_params, edsr_star_forward, sr_forward, sr_trunk
from edgesr.tensor import Tensor

from helpers import noise_image


def _conv_n(ci, co, k):
    return co * ci * k * k + co


def _res_n(f):
    return 2 * _conv_n(f, f, 3)


def _pyr_n(w, n_bins):
    return n_bins * _conv_n(w, w // n_bins, 1) + _conv_n(2 * w, w, 1)


def _rand_x(shape, seed=0):
    return Tensor(np.random.default_rng(seed).standard_normal(shape).astype(np.float32))


# ------------------------------------------------------------ shared blocks


def test_res_block_with_zero_second_conv_is_identity():
    rng = np.random.default_rng(51)
    params = {}
    blocks.add_res_block(params, rng, "rb", 6)
    params["rb.c2.w"].data[:] = 0.0
    x = _rand_x((2, 6, 7, 7), seed=52)
    out = blocks.res_block(params, "rb", x)
    assert np.array_equal(out.data, x.data)


def test_res_block_scales_residual_branch():
    rng = np.random.default_rng(53)
    params = {}
    blocks.add_res_block(params, rng, "rb", 4)
    x = _rand_x((1, 4, 6, 6), seed=54)
    full = blocks.res_block(params, "rb", x, res_scale=1.0).data - x.data
    half = blocks.res_block(params, "rb", x, res_scale=0.5).data - x.data
    assert np.allclose(half, 0.5 * full, atol=1e-6)


def test_pyramid_concat_order_puts_input_first():
    # identity fusion over the first w channels must reproduce the input,
    # which pins concat(input, pooled branches) ordering
    rng = np.random.default_rng(55)
    params = {}
    blocks.add_pyramid(params, rng, "p", 4, (1, 2))
    fuse = np.zeros_like(params["p.fuse.w"].data)
    for i in range(4):
        fuse[i, i, 0, 0] = 1.0
    params["p.fuse.w"].data = fuse
    x = _rand_x((1, 4, 6, 6), seed=56)
    out = blocks.pyramid_pool_block(params, "p", x, (1, 2))
    assert np.array_equal(out.data, x.data)


def test_pyramid_rejects_indivisible_width():
    with pytest.raises(DimensionError):
        blocks.add_pyramid({}, np.random.default_rng(0), "p", 6, (1, 2, 3, 6))


# ------------------------------------------------------------------ sr net


@pytest.mark.parametrize(
    "scale,n,f,bins", [(2, 4, 16, (1, 2, 3, 6)), (4, 2, 8, (1, 2)), (8, 1, 4, (1, 2, 3, 6))]
)
def test_sr_param_count_closed_form(scale, n, f, bins):
    cfg = SRConfig(scale=scale, n_resblocks=n, n_feats=f, pyramid_bins=bins)
    params = build_sr_params(cfg, seed=0)
    n_up = {2: 1, 4: 2, 8: 3}[scale]
    want = (
        _conv_n(3, f, 3)
        + n * _res_n(f)
        + _conv_n(f, f, 3)
        + _pyr_n(f, len(bins))
        + n_up * _conv_n(f, 4 * f, 3)
        + _conv_n(f, 3, 3)
    )
    assert param_count(params) == want


def test_sr_trunk_is_inert_when_zeroed():
    # res_scale 0 plus a zeroed body tail reduce the trunk to the head conv
    cfg = SRConfig(scale=2, n_resblocks=2, n_feats=8, res_scale=0.0, pyramid_bins=(1, 2))
    params = build_sr_params(cfg, seed=1)
    params["body_tail.w"].data[:] = 0.0
    x = _rand_x((1, 3, 8, 8), seed=57)
    trunk = sr_trunk(x, cfg, params)
    head = blocks.conv(params, "head", x)
    assert np.array_equal(trunk.data, head.data)


@pytest.mark.parametrize("scale,h,w", [(2, 8, 10), (4, 7, 9), (8, 6, 7)])
def test_sr_output_extents(scale, h, w):
    cfg = SRConfig(scale=scale, n_resblocks=1, n_feats=8, pyramid_bins=(1, 2))
    params = build_sr_params(cfg, seed=2)
    out = sr_forward(_rand_x((1, 3, h, w), seed=58), cfg, params)
    assert out.shape == (1, 3, scale * h, scale * w)


def test_sr_rejects_input_below_largest_bin():
    cfg = SRConfig(scale=2, n_resblocks=1, n_feats=16)
    params = build_sr_params(cfg, seed=3)
    with pytest.raises(DimensionError):
        sr_forward(_rand_x((1, 3, 4, 4)), cfg, params)


def test_sr_config_validation():
    with pytest.raises(DomainError):
        SRConfig(scale=3).validate()
    with pytest.raises(DomainError):
        SRConfig(n_resblocks=0).validate()
    with pytest.raises(DimensionError):
        SRConfig(n_feats=6).validate()  # 4 pyramid branches


def test_edsr_star_forward_clamps_to_unit_range():
    cfg = SRConfig(scale=2, n_resblocks=1, n_feats=8, pyramid_bins=(1, 2))
    params = build_sr_params(cfg, seed=4)
    out = edsr_star_forward(noise_image(seed=59, n=8), cfg, params)
    assert isinstance(out, ImageBuffer)
    assert out.planes.min() >= 0.0 and out.planes.max() <= 1.0


# ---------------------------------------------------------------- edge net


def _edge_param_formula(cfg):
    widths = cfg.stage_widths()
    sw = cfg.side_width
    nb = len(cfg.side_bins)
    total = _conv_n(3, widths[0], 3)
    for c in range(N_STAGES):
        wc = widths[c]
        if c > 0:
            total += _conv_n(widths[c - 1], wc, 3)
        total += _conv_n(wc, wc, 1) + _res_n(wc)
        total += _conv_n(2 * wc, wc, 1) + _res_n(wc)
    for c in range(N_STAGES):
        total += _conv_n(widths[c], sw, 1)
        total += _conv_n(sw + c, sw, 1)
        total += c * (_pyr_n(sw, nb) + _conv_n(sw, 4 * sw, 3))
        total += _conv_n(sw, 1, 1)
    for c in range(N_STAGES - 1):
        total += _conv_n(1 + (N_STAGES - 1 - c), 1, 1)
    total += _conv_n(N_STAGES, 1, 1)
    return total


@pytest.mark.parametrize("nr", [2, 4])
def test_edge_param_count_closed_form(nr):
    cfg = EdgeNetConfig(nr=nr)
    params = build_edge_params(cfg, seed=5)
    assert param_count(params) == _edge_param_formula(cfg)


def test_edge_backbone_shapes_and_extent_check():
    cfg = EdgeNetConfig(nr=2)
    params = build_edge_params(cfg, seed=6)
    feats = backbone(_rand_x((1, 3, 32, 48), seed=60), cfg, params)
    widths = cfg.stage_widths()
    assert [f.shape for f in feats] == [
        (1, widths[c], 32 >> c, 48 >> c) for c in range(N_STAGES)
    ]
    with pytest.raises(DimensionError):
        backbone(_rand_x((1, 3, 20, 28)), cfg, params)


@pytest.mark.parametrize("h,w", [(20, 28), (32, 32), (17, 16)])
def test_edge_logits_pad_crop_contract(h, w):
    # any input extent comes back at the same extent
    cfg = EdgeNetConfig(nr=2)
    params = build_edge_params(cfg, seed=7)
    out = edge_logits(_rand_x((1, 3, h, w), seed=61), cfg, params)
    assert out.shape == (1, 1, h, w)


def test_zeroed_final_fusion_outputs_are_flat():
    cfg = EdgeNetConfig(nr=2)
    params = build_edge_params(cfg, seed=8)
    params["fuse_final.w"].data[:] = 0.0
    x = _rand_x((1, 3, 16, 16), seed=62)
    cls = dense_edge_forward(x, "classifier", cfg, params)
    reg = dense_edge_forward(x, "regressor", cfg, params)
    assert np.array_equal(cls.data, np.full_like(cls.data, 0.5))
    assert not np.any(reg.data)


def test_dense_edge_forward_rejects_unknown_branch():
    cfg = EdgeNetConfig(nr=2)
    params = build_edge_params(cfg, seed=9)
    with pytest.raises(DomainError):
        dense_edge_forward(_rand_x((1, 3, 16, 16)), "both", cfg, params)


def test_fusion_layers_documented_init():
    cfg = EdgeNetConfig(nr=2)
    params = build_edge_params(cfg, seed=10)
    ff = params["fuse_final.w"].data
    assert ff.shape == (1, N_STAGES, 1, 1)
    assert np.all(ff == 1.0 / N_STAGES)
    assert np.all(params["fuse_final.b"].data == 0.0)
    for c in range(N_STAGES - 1):
        w = params[f"short{c}.w"].data
        assert w.shape == (1, 1 + (N_STAGES - 1 - c), 1, 1)
        want = np.zeros_like(w)
        want[0, 0, 0, 0] = 1.0
        assert np.array_equal(w, want)


def test_short_connections_start_as_passthrough():
    cfg = EdgeNetConfig(nr=2)
    params = build_edge_params(cfg, seed=11)
    sides = [_rand_x((1, 1, 12, 12), seed=70 + c) for c in range(N_STAGES)]
    refined = short_connection_fuse(params, sides)
    for s, r in zip(sides, refined):
        assert np.array_equal(r.data, s.data)


def test_edge_config_validation_and_complexity_sweep():
    with pytest.raises(DomainError):
        EdgeNetConfig(stage_mults=(1, 2, 4)).validate()
    with pytest.raises(DomainError):
        EdgeNetConfig(complexities=(8, 4)).validate()
    with pytest.raises(DomainError):
        EdgeNetConfig(complexities=()).validate()
    with pytest.raises(DimensionError):
        EdgeNetConfig(side_width=3).validate()
    with pytest.raises(DomainError):
        EdgeNetConfig(gt_sigma=0.0).validate()
    cfg = EdgeNetConfig(nr=8)
    assert cfg.stage_widths() == [8, 16, 32, 64, 64]
    low = cfg.at_complexity(4)
    assert low.nr == 4 and low.stage_widths() == [4, 8, 16, 32, 32]
    assert cfg.nr == 8  # original untouched


def test_edge_ensemble_predicts_unit_range_map():
    cfg = EdgeNetConfig(nr=2)
    members = [
        (cfg, build_edge_params(cfg, seed=12), build_edge_params(cfg, seed=13)),
    ]
    out = EdgeEnsemble(members).predict(noise_image(seed=63, n=24))
    assert isinstance(out, ImageBuffer)
    assert out.channels == 1
    assert (out.height, out.width) == (24, 24)
    assert out.planes.min() >= 0.0 and out.planes.max() <= 1.0


# --------------------------------------------------------------- merge net


@pytest.mark.parametrize("skip", [True, False])
def test_merge_param_count_closed_form(skip):
    cfg = MergeConfig(n_resblocks=3, n_feats=8, use_edge_skip=skip)
    params = build_merge_params(cfg, seed=14)
    want = (
        _conv_n(4, 8, 3)
        + 3 * _res_n(8)
        + _conv_n(8, 8, 3)
        + (_conv_n(1, 8, 3) if skip else 0)
        + _conv_n(8, 3, 3)
    )
    assert param_count(params) == want
    assert ("edge_skip.w" in params) == skip


def test_merge_zeroed_skip_matches_no_skip_path():
    cfg = MergeConfig(n_resblocks=2, n_feats=8, use_edge_skip=True)
    params = build_merge_params(cfg, seed=15)
    sr = _rand_x((1, 3, 10, 10), seed=64)
    edge = _rand_x((1, 1, 10, 10), seed=65)
    with_live_skip = merge_forward(sr, edge, cfg, params).data

    params["edge_skip.w"].data[:] = 0.0
    zeroed = merge_forward(sr, edge, cfg, params).data
    shared = {k: v for k, v in params.items() if not k.startswith("edge_skip.")}
    no_skip = merge_forward(
        sr, edge, MergeConfig(n_resblocks=2, n_feats=8, use_edge_skip=False), shared
    ).data
    assert np.array_equal(zeroed, no_skip)
    assert not np.array_equal(with_live_skip, zeroed)


def test_merge_forward_validations():
    cfg = MergeConfig(n_resblocks=1, n_feats=8)
    params = build_merge_params(cfg, seed=16)
    with pytest.raises(DimensionError):
        merge_forward(_rand_x((1, 3, 10, 10)), _rand_x((1, 1, 8, 10)), cfg, params)
    with pytest.raises(DimensionError):
        merge_forward(_rand_x((1, 3, 10, 10)), _rand_x((1, 3, 10, 10)), cfg, params)


def test_merge_images_clamps_and_checks_planes():
    cfg = MergeConfig(n_resblocks=1, n_feats=8)
    params = build_merge_params(cfg, seed=17)
    sr_img = noise_image(seed=66, n=12)
    edge_img = noise_image(seed=67, n=12, channels=1)
    out = merge_images(sr_img, edge_img, cfg, params)
    assert out.planes.shape == (3, 12, 12)
    assert out.planes.min() >= 0.0 and out.planes.max() <= 1.0
    with pytest.raises(DimensionError):
        merge_images(sr_img, sr_img, cfg, params)


def test_merge_config_validation():
    with pytest.raises(DomainError):
        MergeConfig(n_resblocks=0).validate()
    with pytest.raises(DomainError):
        MergeConfig(n_feats=2).validate()
