"""Staged inference: checkpoint loading with config-echo reconstruction,
the three pipeline stages, and the full LR -> SR -> edge -> merged chain.

Between stages every image is snapped to the 8-bit grid (``quantize01``),
which is exactly the PNG save/load round trip; running the stages in one
process therefore produces byte-identical outputs to running them as
separate subcommands over intermediate files.
"""

from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, params_as_tensors
from .config import edge_config_from_kv, merge_config_from_kv, parse_kv_text, read_kv, sr_config_from_kv
from .edgenet import EdgeEnsemble
from .errors import DataError, NumericalError, UsageError
from .image import ImageBuffer, quantize01
from .mergenet import merge_images
from .srnet import edsr_star_forward


def _load(path, what):
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{what} not found: {path}")
    return load_checkpoint(path)


def load_sr(path):
    ck = _load(path, "sr checkpoint")
    cfg = sr_config_from_kv(parse_kv_text(ck.config_text))
    return cfg, params_as_tensors(ck.params)


def load_merge(path):
    ck = _load(path, "merge checkpoint")
    cfg = merge_config_from_kv(parse_kv_text(ck.config_text))
    return cfg, params_as_tensors(ck.params)


def load_edge_member(path):
    ck = _load(path, "edge checkpoint")
    cfg = edge_config_from_kv(parse_kv_text(ck.config_text))
    return cfg, params_as_tensors(ck.params)


def load_ensemble(manifest_path) -> EdgeEnsemble:
    """Manifest key=value file -> ensemble; member paths are relative to
    the manifest's directory."""
    manifest_path = Path(manifest_path)
    kv = read_kv(manifest_path)
    try:
        n = int(kv["members"])
    except (KeyError, ValueError):
        raise DataError(f"{manifest_path}: manifest needs an integer 'members' key")
    members = []
    for i in range(n):
        entry = {}
        for branch in ("classifier", "regressor"):
            key = f"member{i}.{branch}"
            if key not in kv:
                raise DataError(f"{manifest_path}: missing {key}")
            cfg, params = load_edge_member(manifest_path.parent / kv[key])
            entry[branch] = params
            entry["cfg"] = cfg
        members.append((entry["cfg"], entry["classifier"], entry["regressor"]))
    return EdgeEnsemble(members)


def _guard_nan(img: ImageBuffer, what) -> ImageBuffer:
    if not np.all(np.isfinite(img.planes)):
        raise NumericalError(f"{what} produced non-finite samples")
    return img


def sr_stage(lr_img, cfg, params, scale=None) -> ImageBuffer:
    if scale is not None and cfg.scale != scale:
        raise UsageError(f"checkpoint was trained at scale {cfg.scale}, flag requests {scale}")
    out = edsr_star_forward(lr_img, cfg, params)
    return quantize01(_guard_nan(out, "sr stage"))


def edge_stage(img, ensemble: EdgeEnsemble) -> ImageBuffer:
    out = ensemble.predict(img)
    return quantize01(_guard_nan(out, "edge stage"))


def merge_stage(sr_img, edge_img, cfg, params) -> ImageBuffer:
    out = merge_images(sr_img, edge_img, cfg, params)
    return quantize01(_guard_nan(out, "merge stage"))


def run_full_pipeline(lr_img, sr_ckpt, edge_manifest, merge_ckpt, scale):
    """LR image -> {"sr", "edge", "out"} images, staged per the pipeline
    order: the edge map is computed from the SR output, never from LR."""
    sr_cfg, sr_params = load_sr(sr_ckpt)
    ensemble = load_ensemble(edge_manifest)
    merge_cfg, merge_params = load_merge(merge_ckpt)
    sr_img = sr_stage(lr_img, sr_cfg, sr_params, scale)
    edge_img = edge_stage(sr_img, ensemble)
    out_img = merge_stage(sr_img, edge_img, merge_cfg, merge_params)
    return {"sr": sr_img, "edge": edge_img, "out": out_img}
