"""Benchmark evaluation: per-image and mean PSNR/SSIM over two directories
of filename-matched PNGs, emitted as an aligned text table and CSV."""

import math
from pathlib import Path

from .errors import DataError
from .image import load_png
from .metrics import psnr, ssim


def evaluate_benchmark(pred_dir, gt_dir, scale):
    """Rows [(name, psnr, ssim), ...] plus (mean_psnr, mean_ssim).

    Any filename present on only one side aborts with the orphan listing;
    a perfect reconstruction yields inf PSNR, which propagates to the mean.
    """
    pred_dir, gt_dir = Path(pred_dir), Path(gt_dir)
    preds = {p.name: p for p in sorted(pred_dir.glob("*.png"))}
    gts = {p.name: p for p in sorted(gt_dir.glob("*.png"))}
    if not preds or not gts:
        raise DataError(f"no PNG files to compare in {pred_dir} / {gt_dir}")
    pred_only = sorted(set(preds) - set(gts))
    gt_only = sorted(set(gts) - set(preds))
    if pred_only or gt_only:
        raise DataError(
            f"unmatched files: only in {pred_dir}: {pred_only}; only in {gt_dir}: {gt_only}"
        )
    rows = []
    for name in sorted(preds):
        a = load_png(preds[name])
        b = load_png(gts[name])
        rows.append((name, psnr(a, b, scale), ssim(a, b)))
    mean_psnr = sum(r[1] for r in rows) / len(rows)
    mean_ssim = sum(r[2] for r in rows) / len(rows)
    return rows, (mean_psnr, mean_ssim)


def _fmt(x):
    if math.isinf(x):
        return "inf"
    return f"{x:.4f}"


def format_table(rows, means) -> str:
    name_w = max([len("image")] + [len(r[0]) for r in rows])
    lines = [f"{'image':<{name_w}}  {'psnr':>9}  {'ssim':>7}"]
    for name, p, s in rows:
        lines.append(f"{name:<{name_w}}  {_fmt(p):>9}  {_fmt(s):>7}")
    lines.append(f"{'mean':<{name_w}}  {_fmt(means[0]):>9}  {_fmt(means[1]):>7}")
    return "\n".join(lines) + "\n"


def format_csv(rows, means) -> str:
    lines = ["image,psnr,ssim"]
    for name, p, s in rows:
        lines.append(f"{name},{_fmt(p)},{_fmt(s)}")
    lines.append(f"mean,{_fmt(means[0])},{_fmt(means[1])}")
    return "\n".join(lines) + "\n"
