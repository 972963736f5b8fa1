"""Adam optimizer over name -> Tensor parameter dicts."""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError


@dataclass
class AdamState:
    """Per-parameter first/second moments plus the shared step counter."""

    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params, beta1=0.9, beta2=0.999, eps=1e-8):
        st = cls(beta1=beta1, beta2=beta2, eps=eps)
        for name, p in params.items():
            st.m[name] = np.zeros_like(p.data)
            st.v[name] = np.zeros_like(p.data)
        return st


def adam_step(params, grads, state, lr):
    """One Adam update with bias correction; mutates params and state.

    ``grads`` maps the same names as ``params`` to ndarrays of matching
    shape; a missing or misshapen entry is an alignment error.
    """
    if set(grads) != set(params):
        missing = set(params) ^ set(grads)
        raise DimensionError(f"adam_step: parameter/gradient names differ: {sorted(missing)}")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.data.shape:
            raise DimensionError(f"adam_step: grad shape {g.shape} != param shape {p.data.shape} for {name!r}")
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p.data -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
