"""Session fixtures: a tiny trained pipeline reused by the acceptance and
CLI tests so the expensive training happens exactly once."""

import shutil
import time
from pathlib import Path

import pytest

from edgesr.cli import main
from edgesr.image import save_png
from helpers import shape_image, smooth_image

SCALE = 2


def write_config(path, extra=None):
    kv = {
        "train.scale": SCALE,
        "train.batch_size": 4,
        "train.lr_patch": 16,
        "train.base_lr": 1e-3,
        "train.epochs": 3,
        "train.steps_per_epoch": 100,
        "train.seed": 0,
        "sr.scale": SCALE,
        "sr.n_resblocks": 4,
        "sr.n_feats": 16,
        "edge.nr": 8,
        "edge.complexities": "4,8",
        "merge.n_resblocks": 2,
        "merge.n_feats": 16,
    }
    kv.update(extra or {})
    Path(path).write_text("".join(f"{k}={v}\n" for k, v in kv.items()))
    return path


@pytest.fixture(scope="session")
def trained_pipeline(tmp_path_factory):
    """degrade -> train sr -> infer sr -> train edge -> infer edge ->
    train merge, all through the CLI entry point, on a 2-image corpus."""
    base = tmp_path_factory.mktemp("pipeline")
    raw = base / "raw"
    raw.mkdir()
    save_png(smooth_image(seed=3), raw / "img0.png")
    save_png(shape_image(seed=4), raw / "img1.png")

    data = base / "data"
    assert main(["degrade", "--scale", str(SCALE), "--input", str(raw), "--output", str(data)]) == 0

    ckpt = base / "ckpt"
    seconds = {}
    sr_cfg = write_config(base / "sr.cfg")
    t0 = time.monotonic()
    assert main(["train", "--module", "sr", "--config", str(sr_cfg),
                 "--data", str(data), "--out", str(ckpt)]) == 0
    seconds["sr"] = time.monotonic() - t0

    mergedata = base / "mergedata"
    (mergedata / "hr").mkdir(parents=True)
    for f in sorted((data / "hr").glob("*.png")):
        shutil.copy(f, mergedata / "hr" / f.name)
    assert main(["infer", "--stage", "sr", "--scale", str(SCALE),
                 "--input", str(data / "lr"), "--output", str(mergedata / "sr"),
                 "--sr-ckpt", str(ckpt / "sr.ckpt")]) == 0

    edge_cfg = write_config(base / "edge.cfg", {
        "train.batch_size": 2, "train.epochs": 2, "train.steps_per_epoch": 75,
    })
    t0 = time.monotonic()
    assert main(["train", "--module", "edge", "--config", str(edge_cfg),
                 "--data", str(data), "--out", str(ckpt)]) == 0
    seconds["edge"] = time.monotonic() - t0
    manifest = ckpt / "edge_manifest.txt"
    assert main(["infer", "--stage", "edge", "--scale", str(SCALE),
                 "--input", str(mergedata / "sr"), "--output", str(mergedata / "edge"),
                 "--edge-manifest", str(manifest)]) == 0

    merge_cfg = write_config(base / "merge.cfg", {
        "train.epochs": 2, "train.steps_per_epoch": 75,
    })
    t0 = time.monotonic()
    assert main(["train", "--module", "merge", "--config", str(merge_cfg),
                 "--data", str(mergedata), "--out", str(ckpt)]) == 0
    seconds["merge"] = time.monotonic() - t0

    return {
        "train_seconds": seconds,
        "base": base,
        "raw": raw,
        "data": data,
        "mergedata": mergedata,
        "ckpt_dir": ckpt,
        "sr_ckpt": ckpt / "sr.ckpt",
        "edge_manifest": manifest,
        "merge_ckpt": ckpt / "merge.ckpt",
        "sr_config": sr_cfg,
        "edge_config": edge_cfg,
        "merge_config": merge_cfg,
    }
