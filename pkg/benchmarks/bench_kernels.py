"""Benchmark the compiled convolution core against the numpy fallback.

Times conv2d forward and both backward passes on training-shaped tensors,
prints per-call milliseconds for each backend plus the speedup, and checks
that the two backends agree to float32 tolerance on identical inputs.

Run from the repository root after building the extension:

    python3 benchmarks/bench_kernels.py
"""

import argparse
import time

import numpy as np

from edgesr.kernels import conv_numpy

try:
    from edgesr.kernels import _cyconv
except ImportError:
    _cyconv = None

# (label, x shape, w shape, stride, padding)
CASES = [
    ("sr-body 3x3", (8, 16, 24, 24), (16, 16, 3, 3), 1, 1),
    ("edge-stage 3x3", (4, 32, 32, 32), (32, 32, 3, 3), 1, 1),
    ("edge-down s2", (4, 32, 32, 32), (64, 32, 3, 3), 2, 1),
    ("fuse 1x1", (8, 64, 24, 24), (32, 64, 1, 1), 1, 0),
    ("head rgb", (8, 3, 48, 48), (16, 3, 3, 3), 1, 1),
]


def _time(fn, repeats):
    fn()  # warm up
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best * 1e3


def _passes(mod, x, w, stride, padding):
    out = mod.conv2d_forward(x, w, stride, padding)
    g = np.ones_like(out)
    return {
        "forward": lambda: mod.conv2d_forward(x, w, stride, padding),
        "grad-input": lambda: mod.conv2d_backward_input(g, w, x.shape, stride, padding),
        "grad-weight": lambda: mod.conv2d_backward_weight(g, x, w.shape, stride, padding),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=20, help="timing repeats per case (best is kept)")
    args = ap.parse_args()

    if _cyconv is None:
        print("compiled core not available; build it with: pip install -e . --no-build-isolation")
        return

    rng = np.random.default_rng(0)
    print(f"{'case':16s} {'pass':12s} {'numpy ms':>9s} {'cython ms':>10s} {'speedup':>8s} {'max |dev|':>10s}")
    worst_dev = 0.0
    for label, xs, ws, stride, padding in CASES:
        x = rng.standard_normal(xs).astype(np.float32)
        w = (rng.standard_normal(ws) * 0.1).astype(np.float32)
        np_passes = _passes(conv_numpy, x, w, stride, padding)
        cy_passes = _passes(_cyconv, x, w, stride, padding)
        for name in np_passes:
            dev = float(np.abs(np_passes[name]() - cy_passes[name]()).max())
            worst_dev = max(worst_dev, dev)
            t_np = _time(np_passes[name], args.repeats)
            t_cy = _time(cy_passes[name], args.repeats)
            print(f"{label:16s} {name:12s} {t_np:9.3f} {t_cy:10.3f} {t_np / t_cy:7.2f}x {dev:10.2e}")
    print(f"\nworst deviation between backends: {worst_dev:.2e}")


if __name__ == "__main__":
    main()
