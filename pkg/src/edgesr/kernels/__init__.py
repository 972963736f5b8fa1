"""Convolution kernel backends.

The compiled Cython core is preferred when it imported cleanly; otherwise the
numpy fallback is used.  ``EDGESR_BACKEND`` overrides the choice:

    EDGESR_BACKEND=numpy   force the pure fallback
    EDGESR_BACKEND=cython  require the compiled core (ImportError if absent)
    EDGESR_BACKEND=auto    default behaviour

Both backends implement the same contracts and agree to float tolerance;
``benchmarks/bench_kernels.py`` compares their speed.
"""

import os

import numpy as np

from . import conv_numpy

try:
    from . import _cyconv
except ImportError:  # extension not built
    _cyconv = None

_choice = os.environ.get("EDGESR_BACKEND", "auto").lower()
if _choice not in ("auto", "cython", "numpy"):
    raise ValueError(f"EDGESR_BACKEND must be auto|cython|numpy, got {_choice!r}")
if _choice == "cython" and _cyconv is None:
    raise ImportError("EDGESR_BACKEND=cython but the compiled core is not available")

_use_cy = _cyconv is not None and _choice in ("auto", "cython")


def backend_name():
    return "cython" if _use_cy else "numpy"


def _as_c(a):
    return np.ascontiguousarray(a)


if _use_cy:

    def conv2d_forward(x, w, stride, padding):
        return _cyconv.conv2d_forward(_as_c(x), _as_c(w), stride, padding)

    def conv2d_backward_input(grad_out, w, x_shape, stride, padding):
        return _cyconv.conv2d_backward_input(_as_c(grad_out), _as_c(w), tuple(x_shape), stride, padding)

    def conv2d_backward_weight(grad_out, x, w_shape, stride, padding):
        return _cyconv.conv2d_backward_weight(_as_c(grad_out), _as_c(x), tuple(w_shape), stride, padding)

else:
    conv2d_forward = conv_numpy.conv2d_forward
    conv2d_backward_input = conv_numpy.conv2d_backward_input
    conv2d_backward_weight = conv_numpy.conv2d_backward_weight
