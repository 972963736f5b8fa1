"""Training orchestration: patch sampling, augmentation, schedules, the
per-module Adam loops, loss logging and checkpointing.

Determinism contract: every random draw flows from ``TrainConfig.seed``
through ``derive_rng(seed, *path)`` where the path encodes (member,) step
and batch slot.  Reruns are bit-identical, and resuming from the latest
checkpoint reproduces the uninterrupted run exactly, because nothing
depends on wall clock or iteration history.
"""

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import ops
from .checkpoint import Checkpoint, load_checkpoint, params_as_tensors, save_checkpoint
from .config import format_kv, kv_from_edge_config, kv_from_merge_config, kv_from_sr_config, write_kv
from .edgenet import build_edge_params, edge_logits, make_edge_target
from .errors import DataError, DimensionError, DomainError, NumericalError
from .image import load_png
from .mergenet import build_merge_params, merge_forward
from .optim import AdamState, adam_step
from .srnet import build_sr_params, sr_forward
from .tensor import Tensor, backward

MODULES = ("sr", "edge", "merge")
BRANCHES = ("classifier", "regressor")


@dataclass
class TrainConfig:
    module: str = "sr"
    scale: int = 2
    batch_size: int = 4
    lr_patch: int = 24
    base_lr: float = 1e-4
    halving_period_epochs: int = 100
    epochs: int = 2
    steps_per_epoch: int = 50
    seed: int = 0
    loss: str = "l1"

    def validate(self):
        if self.module not in MODULES:
            raise DomainError(f"module must be one of {MODULES}, got {self.module!r}")
        if self.scale not in (2, 4, 8):
            raise DomainError(f"scale must be 2, 4 or 8, got {self.scale}")
        for field_name in ("batch_size", "lr_patch", "halving_period_epochs", "epochs", "steps_per_epoch"):
            if getattr(self, field_name) < 1:
                raise DomainError(f"{field_name} must be >= 1")
        if self.loss not in ("l1", "bce"):
            raise DomainError(f"loss must be l1 or bce, got {self.loss!r}")
        return self


@dataclass
class SampleRecord:
    """Where a training patch came from and how it was augmented; origins
    are LR coordinates, the HR origin is scale times them exactly."""

    image_id: int
    x: int
    y: int
    rot: int  # degrees, counterclockwise, one of 0/90/180/270
    hflip: bool
    vflip: bool


def derive_rng(seed, *path):
    """Independent generator for a (seed, *ints) derivation path."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(p) for p in path)))


def subseed(seed, *path) -> int:
    return int(derive_rng(seed, *path).integers(0, 2**31 - 1))


def augment_planes(planes, rot, hflip, vflip):
    a = planes
    if hflip:
        a = a[:, :, ::-1]
    if vflip:
        a = a[:, ::-1, :]
    k = (rot // 90) % 4
    if k:
        a = np.rot90(a, k, axes=(1, 2))
    return np.ascontiguousarray(a)


def draw_record(h, w, patch, rng, image_id=0) -> SampleRecord:
    """Uniform patch origin plus augmentation code; draw order is fixed."""
    if h < patch or w < patch:
        raise DimensionError(f"image extent {h}x{w} smaller than patch {patch}")
    x = int(rng.integers(0, w - patch + 1))
    y = int(rng.integers(0, h - patch + 1))
    rot = 90 * int(rng.integers(0, 4))
    hflip = bool(rng.integers(0, 2))
    vflip = bool(rng.integers(0, 2))
    return SampleRecord(image_id, x, y, rot, hflip, vflip)


def apply_record(planes, rec: SampleRecord, patch, scale):
    """Crop at scale * (rec.x, rec.y) with extent scale * patch, then augment."""
    p = patch * scale
    x, y = rec.x * scale, rec.y * scale
    return augment_planes(planes[:, y : y + p, x : x + p], rec.rot, rec.hflip, rec.vflip)


def sample_patch_pair(lr, hr, scale, lr_patch, rng, image_id=0):
    """Aligned (LR patch, HR patch, record) from a degraded image pair."""
    lh, lw = lr.planes.shape[1], lr.planes.shape[2]
    hh, hw = hr.planes.shape[1], hr.planes.shape[2]
    if (hh, hw) != (lh * scale, lw * scale):
        raise DimensionError(f"hr extent {hh}x{hw} is not {scale}x the lr extent {lh}x{lw}")
    rec = draw_record(lh, lw, lr_patch, rng, image_id)
    return apply_record(lr.planes, rec, lr_patch, 1), apply_record(hr.planes, rec, lr_patch, scale), rec


def lr_at_epoch(cfg: TrainConfig, epoch) -> float:
    """Halved every halving_period_epochs for sr/merge; constant for edge."""
    if cfg.module == "edge":
        return cfg.base_lr
    return cfg.base_lr * 0.5 ** (epoch // cfg.halving_period_epochs)


# ---------------------------------------------------------------------------
# datasets

def list_pngs(d):
    d = Path(d)
    if not d.is_dir():
        raise DataError(f"not a directory: {d}")
    files = sorted(p for p in d.iterdir() if p.suffix.lower() == ".png")
    if not files:
        raise DataError(f"no PNG files in {d}")
    return files


def load_matched_dirs(*dirs):
    """Load same-named PNGs across directories; any orphan is a data error."""
    listings = [{p.name: p for p in list_pngs(d)} for d in dirs]
    names = sorted(set().union(*listings))
    orphans = [n for n in names if not all(n in ls for ls in listings)]
    if orphans:
        raise DataError(f"unmatched files across {[str(d) for d in dirs]}: {orphans}")
    return [(n,) + tuple(load_png(ls[n]) for ls in listings) for n in names]


# ---------------------------------------------------------------------------
# shared step machinery

def _loss_fn(name):
    return ops.l1_loss if name == "l1" else ops.bce_with_logits


def _adam_update(params, adam, loss, lr):
    grad_map = backward(loss)
    grads = {}
    for name, p in params.items():
        g = grad_map.get(p)
        grads[name] = g if g is not None else np.zeros_like(p.data)
    adam_step(params, grads, adam, lr)


def _check_finite(val, what):
    if not np.isfinite(val):
        raise NumericalError(f"{what} became non-finite ({val})")


def _write_loss_csv(path, losses, append):
    mode = "a" if append and Path(path).exists() else "w"
    with open(path, "w" if mode == "w" else "a", newline="") as f:
        w = csv.writer(f)
        if mode == "w":
            w.writerow(["step", "loss"])
        w.writerows(losses)


class _Run:
    """One model's training loop state: params, Adam, checkpoints, log."""

    def __init__(self, name, params, echo_kv, out_dir, resume):
        self.name = name
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.final_path = self.out_dir / f"{name}.ckpt"
        self.latest_path = self.out_dir / f"{name}_latest.ckpt"
        self.echo = format_kv(echo_kv)
        self.losses = []
        self.start_epoch = 0
        self.resumed = False
        self.params = params
        self.adam = AdamState.for_params(params)
        if resume and self.latest_path.exists():
            ck = load_checkpoint(self.latest_path)
            self.params = params_as_tensors(ck.params)
            if ck.adam is not None:
                self.adam = ck.adam
            self.start_epoch = ck.epoch
            self.resumed = True

    def end_epoch(self, epoch):
        ck = Checkpoint(params=self.params, adam=self.adam, epoch=epoch + 1, config_text=self.echo)
        save_checkpoint(ck, self.latest_path)

    def finish(self, epochs):
        ck = Checkpoint(params=self.params, adam=self.adam, epoch=epochs,
                        config_text=self.echo, losses=list(self.losses))
        save_checkpoint(ck, self.final_path)
        _write_loss_csv(self.out_dir / f"loss_{self.name}.csv", self.losses, append=self.resumed)
        return ck


# ---------------------------------------------------------------------------
# per-module loops

def train_sr(tc: TrainConfig, sr_cfg, data_dir, out_dir, resume=False):
    tc.validate()
    sr_cfg.validate()
    if sr_cfg.scale != tc.scale:
        raise DataError(f"sr.scale={sr_cfg.scale} disagrees with train.scale={tc.scale}")
    data = Path(data_dir)
    pairs = load_matched_dirs(data / "lr", data / "hr")
    run = _Run("sr", build_sr_params(sr_cfg, seed=subseed(tc.seed, 0)),
               kv_from_sr_config(sr_cfg), out_dir, resume)
    loss_fn = _loss_fn(tc.loss)
    for epoch in range(run.start_epoch, tc.epochs):
        lr = lr_at_epoch(tc, epoch)
        for i in range(tc.steps_per_epoch):
            step = epoch * tc.steps_per_epoch + i
            xs, ys = [], []
            for slot in range(tc.batch_size):
                rng = derive_rng(tc.seed, step, slot)
                idx = int(rng.integers(0, len(pairs)))
                lp, hp, _ = sample_patch_pair(pairs[idx][1], pairs[idx][2], tc.scale, tc.lr_patch, rng, idx)
                xs.append(lp)
                ys.append(hp)
            pred = sr_forward(Tensor(np.stack(xs)), sr_cfg, run.params)
            loss = loss_fn(pred, Tensor(np.stack(ys)))
            val = loss.item()
            _check_finite(val, f"sr training loss at step {step}")
            _adam_update(run.params, run.adam, loss, lr)
            run.losses.append((step, val))
        run.end_epoch(epoch)
    return run.finish(tc.epochs)


def train_edge(tc: TrainConfig, edge_cfg, data_dir, out_dir, resume=False):
    """Train every (complexity, branch) member and write the ensemble
    manifest.  Branches are structurally independent: disjoint parameters,
    separate optimizers, and the classifier only ever sees the binary
    target while the regressor only sees the soft one."""
    tc.validate()
    edge_cfg.validate()
    data = Path(data_dir)
    hr_dir = data / "hr" if (data / "hr").is_dir() else data
    images = [(p.name, load_png(p)) for p in list_pngs(hr_dir)]
    targets = [make_edge_target(img, edge_cfg) for _, img in images]
    patch = tc.lr_patch * tc.scale
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"members": str(len(edge_cfg.complexities))}
    history = {}
    for ci, nr in enumerate(edge_cfg.complexities):
        mcfg = edge_cfg.at_complexity(nr)
        for bi, branch in enumerate(BRANCHES):
            name = f"edge_nr{nr}_{branch}"
            manifest[f"member{ci}.{branch}"] = f"{name}.ckpt"
            if resume and (out / f"{name}.ckpt").exists() and not (out / f"{name}_latest.ckpt").exists():
                history[name] = None  # finished in an earlier run
                continue
            run = _Run(name, build_edge_params(mcfg, seed=subseed(tc.seed, 1, nr, bi)),
                       kv_from_edge_config(mcfg), out, resume)
            for epoch in range(run.start_epoch, tc.epochs):
                lr = lr_at_epoch(tc, epoch)
                for i in range(tc.steps_per_epoch):
                    step = epoch * tc.steps_per_epoch + i
                    xs, ts = [], []
                    for slot in range(tc.batch_size):
                        rng = derive_rng(tc.seed, nr, bi, step, slot)
                        idx = int(rng.integers(0, len(images)))
                        img = images[idx][1]
                        rec = draw_record(img.height, img.width, patch, rng, idx)
                        xs.append(apply_record(img.planes, rec, patch, 1))
                        tgt = targets[idx][bi]  # 0 = binary, 1 = soft
                        ts.append(apply_record(tgt[None], rec, patch, 1))
                    logits = edge_logits(Tensor(np.stack(xs)), mcfg, run.params)
                    target = Tensor(np.stack(ts))
                    if branch == "classifier":
                        loss = ops.bce_with_logits(logits, target)
                    else:
                        loss = ops.l1_loss(logits, target)
                    val = loss.item()
                    _check_finite(val, f"{name} training loss at step {step}")
                    _adam_update(run.params, run.adam, loss, lr)
                    run.losses.append((step, val))
                run.end_epoch(epoch)
            history[name] = run.finish(tc.epochs)
            run.latest_path.unlink(missing_ok=True)
    write_kv(manifest, out / "edge_manifest.txt")
    return history


def train_merge(tc: TrainConfig, merge_cfg, data_dir, out_dir, resume=False, name="merge"):
    tc.validate()
    merge_cfg.validate()
    data = Path(data_dir)
    triples = load_matched_dirs(data / "sr", data / "edge", data / "hr")
    for n, sr_img, edge_img, hr_img in triples:
        if edge_img.channels != 1:
            raise DataError(f"{n}: edge input must be a single-channel PNG")
        if sr_img.planes.shape[1:] != hr_img.planes.shape[1:] or sr_img.planes.shape[1:] != edge_img.planes.shape[1:]:
            raise DataError(f"{n}: sr/edge/hr extents differ")
    patch = tc.lr_patch * tc.scale
    run = _Run(name, build_merge_params(merge_cfg, seed=subseed(tc.seed, 2)),
               kv_from_merge_config(merge_cfg), out_dir, resume)
    loss_fn = _loss_fn(tc.loss)
    for epoch in range(run.start_epoch, tc.epochs):
        lr = lr_at_epoch(tc, epoch)
        for i in range(tc.steps_per_epoch):
            step = epoch * tc.steps_per_epoch + i
            srs, eds, hrs = [], [], []
            for slot in range(tc.batch_size):
                rng = derive_rng(tc.seed, step, slot)
                idx = int(rng.integers(0, len(triples)))
                _, sr_img, edge_img, hr_img = triples[idx]
                rec = draw_record(hr_img.height, hr_img.width, patch, rng, idx)
                srs.append(apply_record(sr_img.planes, rec, patch, 1))
                eds.append(apply_record(edge_img.planes, rec, patch, 1))
                hrs.append(apply_record(hr_img.planes, rec, patch, 1))
            pred = merge_forward(Tensor(np.stack(srs)), Tensor(np.stack(eds)), merge_cfg, run.params)
            loss = loss_fn(pred, Tensor(np.stack(hrs)))
            val = loss.item()
            _check_finite(val, f"{name} training loss at step {step}")
            _adam_update(run.params, run.adam, loss, lr)
            run.losses.append((step, val))
        run.end_epoch(epoch)
    return run.finish(tc.epochs)


def train_module(tc: TrainConfig, module_cfg, data_dir, out_dir, resume=False):
    if tc.module == "sr":
        return train_sr(tc, module_cfg, data_dir, out_dir, resume)
    if tc.module == "edge":
        return train_edge(tc, module_cfg, data_dir, out_dir, resume)
    return train_merge(tc, module_cfg, data_dir, out_dir, resume)
