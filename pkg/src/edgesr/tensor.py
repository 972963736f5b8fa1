"""Reverse-mode autodiff over dense numpy buffers.

A ``Tensor`` wraps an ndarray; differentiable operations attach a ``_Node``
recording the parent tensors and a backward closure.  ``backward`` on a
scalar tensor runs one reverse topological sweep, accumulating gradients by
addition across fan-out.  Each node keeps only the activations its backward
rule needs.

Training runs in float32; gradient checking builds float64 tensors and every
operation preserves the input dtype.
"""

import contextlib

import numpy as np

from .errors import DimensionError

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph construction inside the block (inference mode)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class _Node:
    """One tape entry: parent tensors plus the backward closure."""

    __slots__ = ("tag", "parents", "backward_fn")

    def __init__(self, tag, parents, backward_fn):
        self.tag = tag
        self.parents = parents
        self.backward_fn = backward_fn


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "node")

    def __init__(self, data, requires_grad=False):
        arr = np.asarray(data)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float32)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self.node = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data.reshape(()))

    def detach(self):
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        from . import ops

        return ops.add(self, other)

    def __mul__(self, alpha):
        from . import ops

        return ops.scalar_mul(self, alpha)

    __rmul__ = __mul__

    def backward(self):
        return backward(self)


def make_output(data, tag, parents, backward_fn):
    """Wrap an op result, attaching a graph node when grad mode is active.

    ``backward_fn(grad_out) -> tuple`` must return one gradient array (or
    None) per parent, each matching the parent's shape.
    """
    tracked = _grad_enabled and any(p.requires_grad or p.node is not None for p in parents)
    out = Tensor(data, requires_grad=tracked)
    if tracked:
        out.node = _Node(tag, tuple(parents), backward_fn)
    return out


def _toposort(root):
    """Iterative post-order over the graph rooted at ``root``.

    Returns tensors ordered parents-before-children; each visited once.
    """
    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        t, expanded = stack.pop()
        if expanded:
            order.append(t)
            continue
        if id(t) in seen:
            continue
        seen.add(id(t))
        stack.append((t, True))
        if t.node is not None:
            for p in t.node.parents:
                if id(p) not in seen:
                    stack.append((p, False))
    return order


def backward(loss):
    """Reverse sweep from a scalar loss.

    Sets ``.grad`` on every reachable tensor with ``requires_grad`` and
    returns the full gradient map {tensor: ndarray} for reachable tensors.
    """
    if loss.data.size != 1:
        raise DimensionError(f"backward requires a scalar loss, got shape {loss.data.shape}")

    grads = {id(loss): np.ones_like(loss.data)}
    by_id = {id(loss): loss}
    order = _toposort(loss)
    for t in reversed(order):
        g = grads.get(id(t))
        if g is None or t.node is None:
            continue
        parent_grads = t.node.backward_fn(g)
        for p, pg in zip(t.node.parents, parent_grads):
            if pg is None:
                continue
            if pg.shape != p.data.shape:
                raise DimensionError(
                    f"backward of {t.node.tag}: gradient shape {pg.shape} != parent shape {p.data.shape}"
                )
            if id(p) in grads:
                grads[id(p)] = grads[id(p)] + pg
            else:
                grads[id(p)] = pg
                by_id[id(p)] = p

    result = {}
    for tid, g in grads.items():
        t = by_id[tid]
        result[t] = g
        if t.requires_grad:
            t.grad = g if t.grad is None else t.grad + g
    return result


def zero_grads(params):
    """Clear accumulated gradients on a name->Tensor parameter dict."""
    for p in params.values():
        p.grad = None
