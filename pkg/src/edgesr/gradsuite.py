"""The finite-difference verification suite behind ``gradcheck``.

Every differentiable primitive is checked against central differences in
double precision; exactly-linear ops must agree to 1e-6, everything else
to 1e-4.  The three networks are checked end to end with sampled
coordinates per parameter tensor, which keeps the whole suite fast.

Nonsmooth ops (relu, clamp, l1) are probed with inputs held away from
their kinks, since a central difference across a kink measures nothing.
"""

import numpy as np

from . import ops
from .edgenet import EdgeNetConfig, build_edge_params, edge_logits
from .gradcheck import grad_check, grad_check_params
from .mergenet import MergeConfig, build_merge_params, merge_forward
from .srnet import SRConfig, build_sr_params, sr_forward
from .tensor import Tensor

TOL_LINEAR = 1e-6
TOL_NONLINEAR = 1e-4


def _t(rng, shape, lo=-1.0, hi=1.0):
    return Tensor(rng.uniform(lo, hi, size=shape))


def _generic_params64(params, seed):
    """Float64 copy of a parameter dict, resampled at a generic point.

    The training initializer is nearly degenerate for finite differences:
    biases start at zero, so whole channels of relu pre-activations sit on
    the kink, and identity-flavored fuse weights leave deep stages with
    gradients down at 1e-10 where f64 central differences have no signal.
    Verifying the backward pass at a generic random point exercises the
    same code with well-conditioned magnitudes.  The per-layer gain keeps
    activations O(1) through the deepest stacks without saturating the
    classifier sigmoid.
    """
    rng = np.random.default_rng(seed)
    out = {}
    for name in sorted(params):
        shape = params[name].data.shape
        s = 1.6 / np.sqrt(np.prod(shape[1:])) if len(shape) >= 2 else 0.3
        out[name] = Tensor(rng.uniform(-s, s, size=shape), requires_grad=True)
    return out


def _away_from_zero(rng, shape, margin=0.2):
    a = rng.uniform(margin, 1.0, size=shape)
    return Tensor(a * np.where(rng.uniform(size=shape) < 0.5, -1.0, 1.0))


def _check(records, name, tol, forward, x, rng, max_coords=None):
    err = grad_check(forward, x, max_coords=max_coords, rng=rng)
    records.append({"name": name, "err": err, "tol": tol, "ok": err <= tol})


def core_checks():
    records = []
    rng = np.random.default_rng(7)

    w = _t(rng, (4, 3, 3, 3))
    b = _t(rng, (4,))
    _check(records, "conv2d/input", TOL_LINEAR,
           lambda t: ops.tsum(ops.conv2d(t, w, b, stride=1, padding=1)), _t(rng, (2, 3, 6, 6)), rng)
    x0 = _t(rng, (2, 3, 7, 7))
    _check(records, "conv2d/weight", TOL_LINEAR,
           lambda t: ops.tsum(ops.conv2d(x0, t, b, stride=2, padding=0)), _t(rng, (4, 3, 3, 3)), rng)
    _check(records, "conv2d/bias", TOL_LINEAR,
           lambda t: ops.tsum(ops.conv2d(x0, w, t, stride=2, padding=1)), _t(rng, (4,)), rng)
    _check(records, "conv2d/sigmoid-composite", TOL_NONLINEAR,
           lambda t: ops.tsum(ops.sigmoid(ops.conv2d(t, w, b, stride=1, padding=1))), _t(rng, (1, 3, 5, 5)), rng)

    _check(records, "relu", TOL_NONLINEAR,
           lambda t: ops.tsum(ops.relu(t)), _away_from_zero(rng, (3, 2, 4, 4)), rng)
    other = _t(rng, (2, 2, 3, 3))
    _check(records, "add", TOL_LINEAR, lambda t: ops.tsum(ops.add(t, other)), _t(rng, (2, 2, 3, 3)), rng)
    _check(records, "scalar_mul", TOL_LINEAR, lambda t: ops.tsum(ops.scalar_mul(t, -1.7)), _t(rng, (2, 3)), rng)
    _check(records, "concat_channels", TOL_LINEAR,
           lambda t: ops.tsum(ops.concat_channels([t, other, t])), _t(rng, (2, 4, 3, 3)), rng)
    _check(records, "sigmoid", TOL_NONLINEAR, lambda t: ops.tsum(ops.sigmoid(t)), _t(rng, (3, 5), lo=-3, hi=3), rng)

    inside = Tensor(rng.uniform(0.15, 0.85, size=(4, 4)))
    _check(records, "clamp01", TOL_NONLINEAR, lambda t: ops.tsum(ops.clamp01(t)), inside, rng)

    _check(records, "adaptive_avg_pool2d", TOL_LINEAR,
           lambda t: ops.tsum(ops.adaptive_avg_pool2d(t, (3, 2))), _t(rng, (2, 3, 7, 5)), rng)
    _check(records, "bilinear_upsample/up", TOL_LINEAR,
           lambda t: ops.tsum(ops.bilinear_upsample(t, (9, 11))), _t(rng, (1, 2, 4, 5)), rng)
    _check(records, "bilinear_upsample/down", TOL_LINEAR,
           lambda t: ops.tsum(ops.bilinear_upsample(t, (3, 2))), _t(rng, (1, 2, 6, 7)), rng)
    _check(records, "pad2d_reflect", TOL_LINEAR,
           lambda t: ops.tsum(ops.pad2d_reflect(t, 3, 2)), _t(rng, (1, 2, 5, 5)), rng)
    _check(records, "crop2d", TOL_LINEAR,
           lambda t: ops.tsum(ops.crop2d(t, 3, 4)), _t(rng, (1, 2, 5, 6)), rng)
    _check(records, "pixel_shuffle", TOL_LINEAR,
           lambda t: ops.tsum(ops.pixel_shuffle(t, 2)), _t(rng, (2, 8, 3, 3)), rng)

    pred0 = _t(rng, (2, 3, 4, 4))
    gap = Tensor(pred0.data + rng.uniform(0.3, 1.0, size=pred0.shape))
    _check(records, "l1_loss", TOL_NONLINEAR, lambda t: ops.l1_loss(t, gap), pred0, rng)
    tgt = Tensor((rng.uniform(size=(3, 6)) < 0.5).astype(np.float64))
    _check(records, "bce_with_logits", TOL_NONLINEAR,
           lambda t: ops.bce_with_logits(t, tgt), _t(rng, (3, 6), lo=-2, hi=2), rng)
    return records


def sr_checks():
    records = []
    rng = np.random.default_rng(11)
    cfg = SRConfig(scale=2, n_resblocks=1, n_feats=4, res_scale=1.0, pyramid_bins=(1, 2))
    params = _generic_params64(build_sr_params(cfg, seed=3), seed=103)
    x = _t(rng, (1, 3, 8, 8), lo=0.0, hi=1.0)
    target = _t(rng, (1, 3, 16, 16), lo=2.0, hi=3.0)  # far from pred: no l1 kink

    def loss(ps):
        return ops.l1_loss(sr_forward(x, cfg, ps), target)

    err = grad_check_params(loss, params, coords_per_tensor=4, seed=5)
    records.append({"name": "sr/params", "err": err, "tol": TOL_NONLINEAR, "ok": err <= TOL_NONLINEAR})
    _check(records, "sr/input", TOL_NONLINEAR,
           lambda t: ops.l1_loss(sr_forward(t, cfg, params), target), x, rng, max_coords=24)
    return records


def edge_checks():
    records = []
    rng = np.random.default_rng(13)
    cfg = EdgeNetConfig(nr=2, complexities=(2,), side_width=4)
    x = _t(rng, (1, 3, 16, 16), lo=0.0, hi=1.0)
    binary = Tensor((rng.uniform(size=(1, 1, 16, 16)) < 0.2).astype(np.float64))
    soft = Tensor(rng.uniform(2.0, 3.0, size=(1, 1, 16, 16)))

    params_c = _generic_params64(build_edge_params(cfg, seed=4), seed=104)
    err = grad_check_params(lambda ps: ops.bce_with_logits(edge_logits(x, cfg, ps), binary),
                            params_c, coords_per_tensor=2, seed=6)
    records.append({"name": "edge/classifier-params", "err": err, "tol": TOL_NONLINEAR, "ok": err <= TOL_NONLINEAR})

    params_r = _generic_params64(build_edge_params(cfg, seed=9), seed=109)
    err = grad_check_params(lambda ps: ops.l1_loss(edge_logits(x, cfg, ps), soft),
                            params_r, coords_per_tensor=2, seed=8)
    records.append({"name": "edge/regressor-params", "err": err, "tol": TOL_NONLINEAR, "ok": err <= TOL_NONLINEAR})
    return records


def merge_checks():
    records = []
    rng = np.random.default_rng(17)
    sr = _t(rng, (1, 3, 8, 8), lo=0.0, hi=1.0)
    edge = _t(rng, (1, 1, 8, 8), lo=0.0, hi=1.0)
    target = _t(rng, (1, 3, 8, 8), lo=2.0, hi=3.0)
    for skip in (True, False):
        cfg = MergeConfig(n_resblocks=1, n_feats=4, use_edge_skip=skip)
        params = _generic_params64(build_merge_params(cfg, seed=2), seed=102)
        err = grad_check_params(lambda ps: ops.l1_loss(merge_forward(sr, edge, cfg, ps), target),
                                params, coords_per_tensor=4, seed=7)
        tag = "with-skip" if skip else "no-skip"
        records.append({"name": f"merge/params-{tag}", "err": err, "tol": TOL_NONLINEAR, "ok": err <= TOL_NONLINEAR})
    return records


_SUITES = {
    "core": core_checks,
    "sr": sr_checks,
    "edge": edge_checks,
    "merge": merge_checks,
}


def run_suite(module="all"):
    if module == "all":
        records = []
        for fn in _SUITES.values():
            records.extend(fn())
        return records
    return _SUITES[module]()
