"""Command-line surface wiring the pipeline together.

Exit codes are a stable contract: 0 success, 1 usage error, 2 data or
format error, 3 numerical failure (non-finite values detected).  All
randomness flows from --seed; omitting it means seed 0, never entropy.
"""

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .config import (
    config_from_kv,
    edge_config_from_kv,
    merge_config_from_kv,
    read_kv,
    sr_config_from_kv,
)
from .errors import (
    DataError,
    DimensionError,
    DomainError,
    FormatError,
    NumericalError,
    UsageError,
)
from .evaluate import evaluate_benchmark, format_csv, format_table
from .gradsuite import run_suite
from .image import load_png, save_png
from .metrics import psnr, ssim
from .pipeline import (
    edge_stage,
    load_ensemble,
    load_merge,
    load_sr,
    merge_stage,
    run_full_pipeline,
    sr_stage,
)
from .resample import degrade_pair
from .training import TrainConfig, load_matched_dirs, train_merge, train_module


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems through the exit-code contract
    instead of calling sys.exit(2)."""

    def error(self, message):
        raise UsageError(message)


def _build_parser():
    p = _Parser(prog="edgesr", description="Three-stage edge-guided super resolution")
    sub = p.add_subparsers(dest="command", metavar="COMMAND")

    d = sub.add_parser("degrade", help="offset-fix HR images and write aligned bicubic LR pairs")
    d.add_argument("--scale", type=int, choices=(2, 4, 8), required=True)
    d.add_argument("--input", required=True, help="directory of HR PNGs")
    d.add_argument("--output", required=True, help="directory for hr/ and lr/ subdirectories")
    d.set_defaults(func=_cmd_degrade)

    t = sub.add_parser("train", help="train one module")
    t.add_argument("--module", choices=("sr", "edge", "merge"), required=True)
    t.add_argument("--config", required=True, help="key=value config file")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--seed", type=int, default=None, help="overrides train.seed (default 0)")
    t.add_argument("--resume", action="store_true", help="continue from the latest checkpoint in --out")
    t.set_defaults(func=_cmd_train)

    i = sub.add_parser("infer", help="run one stage or the full pipeline")
    i.add_argument("--stage", choices=("sr", "edge", "merge", "full"), required=True)
    i.add_argument("--scale", type=int, choices=(2, 4, 8), required=True)
    i.add_argument("--input", required=True, help="PNG file or directory")
    i.add_argument("--output", required=True)
    i.add_argument("--sr-ckpt")
    i.add_argument("--edge-manifest")
    i.add_argument("--merge-ckpt")
    i.add_argument("--edge-input", help="edge map PNG (or directory) for --stage merge")
    i.add_argument("--emit-intermediates", action="store_true")
    i.set_defaults(func=_cmd_infer)

    e = sub.add_parser("eval", help="PSNR/SSIM over filename-matched directories")
    e.add_argument("--pred", required=True)
    e.add_argument("--gt", required=True)
    e.add_argument("--scale", type=int, required=True)
    e.add_argument("--csv", help="also write the table as CSV")
    e.set_defaults(func=_cmd_eval)

    g = sub.add_parser("gradcheck", help="finite-difference gradient verification suite")
    g.add_argument("--module", choices=("all", "core", "sr", "edge", "merge"), default="all")
    g.set_defaults(func=_cmd_gradcheck)

    a = sub.add_parser("ablate", help="train and score MergeNet with and without the edge skip")
    a.add_argument("--config", required=True)
    a.add_argument("--data", required=True, help="directory with sr/, edge/ and hr/ subdirectories")
    a.add_argument("--out", required=True)
    a.add_argument("--seed", type=int, default=None)
    a.set_defaults(func=_cmd_ablate)
    return p


# ---------------------------------------------------------------------------
# commands

def _cmd_degrade(args):
    in_dir = Path(args.input)
    if not in_dir.is_dir():
        raise DataError(f"input is not a directory: {in_dir}")
    files = sorted(in_dir.glob("*.png"))
    if not files:
        raise DataError(f"no PNG files in {in_dir}")
    out = Path(args.output)
    (out / "hr").mkdir(parents=True, exist_ok=True)
    (out / "lr").mkdir(parents=True, exist_ok=True)
    for f in files:
        lr_img, hr_img = degrade_pair(load_png(f), args.scale)
        save_png(hr_img, out / "hr" / f.name)
        save_png(lr_img, out / "lr" / f.name)
        print(f"{f.name}: hr {hr_img.width}x{hr_img.height} -> lr {lr_img.width}x{lr_img.height}")
    return 0


def _train_config(args):
    kv = read_kv(args.config)
    tc = config_from_kv(TrainConfig, kv, "train")
    tc.module = getattr(args, "module", tc.module)
    if args.seed is not None:
        tc.seed = args.seed
    tc.validate()
    return kv, tc


def _cmd_train(args):
    kv, tc = _train_config(args)
    if args.module == "sr":
        mcfg = sr_config_from_kv(kv)
    elif args.module == "edge":
        mcfg = edge_config_from_kv(kv)
    else:
        mcfg = merge_config_from_kv(kv)
    result = train_module(tc, mcfg, args.data, args.out, resume=args.resume)
    if args.module == "edge":
        print(f"trained {len(result)} edge members -> {Path(args.out) / 'edge_manifest.txt'}")
    else:
        print(f"final loss {result.losses[-1][1]:.6f}" if result.losses else "no steps run")
        print(f"checkpoint -> {Path(args.out) / (args.module + '.ckpt')}")
    return 0


def _input_images(path):
    p = Path(path)
    if p.is_dir():
        files = sorted(p.glob("*.png"))
        if not files:
            raise DataError(f"no PNG files in {p}")
        return [(f.stem, load_png(f)) for f in files], True
    if p.is_file():
        return [(p.stem, load_png(p))], False
    raise DataError(f"input not found: {p}")


def _require(args, flag):
    val = getattr(args, flag.strip("-").replace("-", "_"))
    if not val:
        raise UsageError(f"--stage {args.stage} requires {flag}")
    return val


def _out_path(args, is_dir_mode, stem, suffix=""):
    out = Path(args.output)
    if is_dir_mode:
        out.mkdir(parents=True, exist_ok=True)
        return out / f"{stem}{suffix}.png"
    out.parent.mkdir(parents=True, exist_ok=True)
    if suffix:
        return out.with_name(out.stem + suffix + out.suffix)
    return out


def _cmd_infer(args):
    images, dir_mode = _input_images(args.input)
    if args.stage == "sr":
        cfg, params = load_sr(_require(args, "--sr-ckpt"))
        for stem, img in images:
            save_png(sr_stage(img, cfg, params, args.scale), _out_path(args, dir_mode, stem))
    elif args.stage == "edge":
        ensemble = load_ensemble(_require(args, "--edge-manifest"))
        for stem, img in images:
            save_png(edge_stage(img, ensemble), _out_path(args, dir_mode, stem))
    elif args.stage == "merge":
        cfg, params = load_merge(_require(args, "--merge-ckpt"))
        edge_path = Path(_require(args, "--edge-input"))
        for stem, img in images:
            ep = edge_path / f"{stem}.png" if edge_path.is_dir() else edge_path
            if not ep.is_file():
                raise DataError(f"edge input not found: {ep}")
            save_png(merge_stage(img, load_png(ep), cfg, params), _out_path(args, dir_mode, stem))
    else:
        sr_ckpt = _require(args, "--sr-ckpt")
        manifest = _require(args, "--edge-manifest")
        merge_ckpt = _require(args, "--merge-ckpt")
        for stem, img in images:
            staged = run_full_pipeline(img, sr_ckpt, manifest, merge_ckpt, args.scale)
            save_png(staged["out"], _out_path(args, dir_mode, stem))
            if args.emit_intermediates:
                save_png(staged["sr"], _out_path(args, dir_mode, stem, "_sr"))
                save_png(staged["edge"], _out_path(args, dir_mode, stem, "_edge"))
    return 0


def _cmd_eval(args):
    rows, means = evaluate_benchmark(args.pred, args.gt, args.scale)
    sys.stdout.write(format_table(rows, means))
    if args.csv:
        Path(args.csv).parent.mkdir(parents=True, exist_ok=True)
        with open(args.csv, "w") as f:
            f.write(format_csv(rows, means))
    return 0


def _cmd_gradcheck(args):
    records = run_suite(args.module)
    failed = 0
    for r in records:
        status = "PASS" if r["ok"] else "FAIL"
        failed += 0 if r["ok"] else 1
        print(f"{status} {r['name']:<28} max_rel_err={r['err']:.3e} tol={r['tol']:.0e}")
    print(f"{len(records) - failed}/{len(records)} checks passed")
    if failed:
        raise NumericalError(f"{failed} gradient checks exceeded tolerance")
    return 0


def _cmd_ablate(args):
    kv, tc = _train_config(args)
    tc.module = "merge"
    tc.validate()
    base = merge_config_from_kv(kv)
    out = Path(args.out)
    variants = [
        ("with_edge_skip", replace(base, use_edge_skip=True)),
        ("no_edge_skip", replace(base, use_edge_skip=False)),
    ]
    triples = load_matched_dirs(Path(args.data) / "sr", Path(args.data) / "edge", Path(args.data) / "hr")
    scores = {}
    for name, cfg in variants:
        train_merge(tc, cfg, args.data, out, name=name)
        mcfg, params = load_merge(out / f"{name}.ckpt")
        ps, ss = [], []
        for _, sr_img, edge_img, hr_img in triples:
            merged = merge_stage(sr_img, edge_img, mcfg, params)
            ps.append(psnr(merged, hr_img, tc.scale))
            ss.append(ssim(merged, hr_img))
        scores[name] = (sum(ps) / len(ps), sum(ss) / len(ss))
    d_psnr = scores["with_edge_skip"][0] - scores["no_edge_skip"][0]
    d_ssim = scores["with_edge_skip"][1] - scores["no_edge_skip"][1]
    lines = ["variant         psnr      ssim"]
    for name in ("with_edge_skip", "no_edge_skip"):
        lines.append(f"{name:<14}  {scores[name][0]:8.4f}  {scores[name][1]:.4f}")
    lines.append(f"{'delta':<14}  {d_psnr:+8.4f}  {d_ssim:+.4f}")
    report = "\n".join(lines) + "\n"
    sys.stdout.write(report)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "ablation.txt", "w") as f:
        f.write(report)
    with open(out / "ablation.csv", "w") as f:
        f.write("variant,psnr,ssim\n")
        for name in ("with_edge_skip", "no_edge_skip"):
            f.write(f"{name},{scores[name][0]:.6f},{scores[name][1]:.6f}\n")
        f.write(f"delta,{d_psnr:.6f},{d_ssim:.6f}\n")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            raise UsageError("a subcommand is required (degrade, train, infer, eval, gradcheck, ablate)")
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (DataError, FormatError, DomainError, DimensionError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except NumericalError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
