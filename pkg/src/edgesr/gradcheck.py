"""Finite-difference gradient checking.

Central differences are only meaningful in double precision, so callers
build float64 tensors for the check; training itself stays in float32.
"""

import numpy as np

from .tensor import backward, no_grad


def grad_check(forward, x, h=1e-4, max_coords=None, rng=None):
    """Max relative error between reverse-mode and central-difference
    gradients of a scalar-valued ``forward`` with respect to ``x``.

    The error per coordinate is |a - n| / max(|a|, |n|, 1e-8).  When
    ``max_coords`` is set, a random subset of coordinates of that size is
    checked (seeded via ``rng``), which keeps whole-network checks fast.

    A central difference across a relu-style kink measures the average of
    two slopes rather than either one, and perturbing a single parameter
    of a network moves every downstream pre-activation, so some kink can
    land inside the probe interval no matter where the check is run.  The
    symmetric second difference f(+h) + f(-h) - 2 f(0) exposes this: it is
    ~0 for a smooth function at these step sizes but jumps to the slope
    discontinuity times h when the interval straddles a kink.  When that
    happens the step is shrunk (the kink stays put, so a small enough
    interval excludes it) and the coordinate is re-measured.
    """
    if x.data.dtype != np.float64:
        raise ValueError("grad_check requires a float64 input tensor")
    x.requires_grad = True
    x.grad = None
    out = forward(x)
    if out.data.size != 1:
        raise ValueError("grad_check: forward must produce a scalar")
    backward(out)
    analytic = x.grad if x.grad is not None else np.zeros_like(x.data)

    flat = x.data.reshape(-1)
    n_total = flat.size
    if max_coords is not None and max_coords < n_total:
        rng = rng or np.random.default_rng(0)
        coords = rng.choice(n_total, size=max_coords, replace=False)
    else:
        coords = range(n_total)

    a_flat = analytic.reshape(-1)
    worst = 0.0
    with no_grad():
        f_zero = forward(x).item()
        kink_atol = 1e-10 * max(1.0, abs(f_zero))
        for i in coords:
            orig = flat[i]
            for step in (h, h / 4, h / 16, h / 64):
                flat[i] = orig + step
                f_plus = forward(x).item()
                flat[i] = orig - step
                f_minus = forward(x).item()
                flat[i] = orig
                numeric = (f_plus - f_minus) / (2.0 * step)
                if abs(f_plus + f_minus - 2.0 * f_zero) <= kink_atol:
                    break
            denom = max(abs(a_flat[i]), abs(numeric), 1e-8)
            worst = max(worst, abs(a_flat[i] - numeric) / denom)
    return worst


def grad_check_params(forward, params, h=1e-4, coords_per_tensor=8, seed=0):
    """Sampled finite-difference check of d(forward)/d(param) for every
    tensor in a parameter dict; returns the max relative error."""
    worst = 0.0
    for k, name in enumerate(sorted(params)):
        p = params[name]
        if p.data.dtype != np.float64:
            raise ValueError(f"grad_check_params: parameter {name!r} must be float64")
        rng = np.random.default_rng((seed, k))
        err = grad_check(lambda _t, _n=name: forward(params), p, h=h,
                         max_coords=coords_per_tensor, rng=rng)
        worst = max(worst, err)
    return worst
