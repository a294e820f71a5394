"""Dense float64 arithmetic with a small reverse-mode tape.

Every primitive here accepts plain numpy arrays or :class:`Var` nodes. When no
argument is a ``Var`` the primitive evaluates eagerly and returns an ndarray,
so the same model code serves both the differentiable training path and the
plain inference path.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np


class DimensionError(ValueError):
    """Operand shapes are inconsistent."""


class NumericalError(FloatingPointError):
    """A node of the computation produced a non-finite value."""


class Var:
    """Node of the reverse-mode tape.

    ``parents`` holds ``(node, vjp)`` pairs where ``vjp`` maps the upstream
    gradient of this node to the gradient contribution for ``node``.
    """

    __slots__ = ("value", "parents", "op")
    __array_priority__ = 1000.0

    def __init__(self, value, parents=(), op="leaf"):
        self.value = np.asarray(value, dtype=np.float64)
        self.parents = parents
        self.op = op

    @property
    def shape(self):
        return self.value.shape

    def __float__(self):
        return float(self.value)

    def __repr__(self):
        return f"Var(op={self.op!r}, shape={self.value.shape})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(other))

    def __rsub__(self, other):
        return add(other, neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Var):
            raise TypeError("division by a Var is not supported")
        return mul(self, 1.0 / np.asarray(other, dtype=np.float64))

    def __neg__(self):
        return neg(self)


def value_of(x):
    return x.value if isinstance(x, Var) else np.asarray(x, dtype=np.float64)


def _node(value, parents, op):
    live = tuple((p, fn) for p, fn in parents if isinstance(p, Var))
    if not live:
        return value
    if not np.all(np.isfinite(value)):
        raise NumericalError(f"non-finite value produced by '{op}'")
    return Var(value, live, op)


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# elementwise and reduction primitives


def add(a, b):
    av, bv = value_of(a), value_of(b)
    out = av + bv
    return _node(
        out,
        ((a, lambda g: _unbroadcast(g, av.shape)), (b, lambda g: _unbroadcast(g, bv.shape))),
        "add",
    )


def neg(a):
    return _node(-value_of(a), ((a, lambda g: -g),), "neg")


def mul(a, b):
    av, bv = value_of(a), value_of(b)
    return _node(
        av * bv,
        ((a, lambda g: _unbroadcast(g * bv, av.shape)), (b, lambda g: _unbroadcast(g * av, bv.shape))),
        "mul",
    )


def square(a):
    av = value_of(a)
    return _node(av * av, ((a, lambda g: 2.0 * av * g),), "square")


def exp(a):
    out = np.exp(value_of(a))
    return _node(out, ((a, lambda g: g * out),), "exp")


def tanh(a):
    out = np.tanh(value_of(a))
    return _node(out, ((a, lambda g: g * (1.0 - out * out)),), "tanh")


def relu(a):
    av = value_of(a)
    mask = av > 0
    return _node(np.where(mask, av, 0.0), ((a, lambda g: g * mask),), "relu")


def clip(a, lo, hi):
    av = value_of(a)
    inside = (av >= lo) & (av <= hi)
    return _node(np.clip(av, lo, hi), ((a, lambda g: g * inside),), "clip")


def softplus(a):
    """log(1 + e^a), evaluated without overflow."""
    av = value_of(a)
    out = np.logaddexp(0.0, av)
    sig = 0.5 * (1.0 + np.tanh(0.5 * av))
    return _node(out, ((a, lambda g: g * sig),), "softplus")


def sigmoid(a):
    av = value_of(a)
    out = 0.5 * (1.0 + np.tanh(0.5 * av))
    return _node(out, ((a, lambda g: g * out * (1.0 - out)),), "sigmoid")


def log_softmax(a):
    """Row-wise log-softmax of a 2-D operand."""
    av = value_of(a)
    shifted = av - av.max(axis=1, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    soft = np.exp(out)
    return _node(out, ((a, lambda g: g - soft * g.sum(axis=1, keepdims=True)),), "log_softmax")


def sum_(a, axis=None):
    av = value_of(a)
    out = av.sum(axis=axis)

    def vjp(g):
        if axis is None:
            return np.broadcast_to(g, av.shape).copy()
        return np.broadcast_to(np.expand_dims(g, axis), av.shape).copy()

    return _node(out, ((a, vjp),), "sum")


def mean(a, axis=None):
    av = value_of(a)
    count = av.size if axis is None else av.shape[axis]
    return sum_(a, axis) / count if isinstance(a, Var) else av.mean(axis=axis)


# layers


@dataclass
class AffineLayer:
    """``y = x W^T + b`` with ``W`` of shape (out, in)."""

    weights: object
    bias: object

    @property
    def in_dim(self):
        return value_of(self.weights).shape[1]

    @property
    def out_dim(self):
        return value_of(self.weights).shape[0]


def affine_forward(layer: AffineLayer, x):
    W, b = layer.weights, layer.bias
    xv, Wv, bv = value_of(x), value_of(W), value_of(b)
    if xv.ndim != 2:
        raise DimensionError(f"affine input must be 2-D, got shape {xv.shape}")
    if xv.shape[1] != Wv.shape[1]:
        raise DimensionError(f"input has {xv.shape[1]} columns, layer expects {Wv.shape[1]}")
    if bv.shape != (Wv.shape[0],):
        raise DimensionError(f"bias shape {bv.shape} does not match {Wv.shape[0]} outputs")
    out = xv @ Wv.T + bv
    return _node(
        out,
        (
            (x, lambda g: g @ Wv),
            (W, lambda g: g.T @ xv),
            (b, lambda g: g.sum(axis=0)),
        ),
        "affine",
    )


ACTIVATIONS = {"relu": relu, "tanh": tanh}


def activation_forward(kind: str, x):
    try:
        fn = ACTIVATIONS[kind]
    except KeyError:
        raise ValueError(f"unknown activation {kind!r}") from None
    return fn(x)


def glorot_uniform(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


# reverse pass


def backward(root: Var) -> dict[int, np.ndarray]:
    """Gradients of scalar ``root`` with respect to every node, keyed by ``id``."""
    if root.value.size != 1:
        raise DimensionError("backward needs a scalar root")
    order: list[Var] = []
    seen: set[int] = set()
    stack: list[tuple[Var, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent, _ in node.parents:
            if id(parent) not in seen:
                stack.append((parent, False))

    grads = {id(root): np.ones_like(root.value)}
    for node in reversed(order):
        g = grads.get(id(node))
        if g is None:
            continue
        for parent, vjp in node.parents:
            contrib = vjp(g)
            if not np.all(np.isfinite(contrib)):
                raise NumericalError(f"non-finite gradient flowing from '{node.op}' into '{parent.op}'")
            key = id(parent)
            grads[key] = grads[key] + contrib if key in grads else contrib
    return grads


def value_and_grad(loss_fn: Callable, params: Mapping[str, np.ndarray], has_aux: bool = False):
    """Evaluate ``loss_fn`` on tape-wrapped ``params`` and return its gradients.

    ``loss_fn`` receives a dict of :class:`Var` leaves with the same keys. With
    ``has_aux`` it must return ``(loss, aux)``; the result is then
    ``(loss_value, aux, grads)``.
    """
    leaves = {name: Var(value, op=name) for name, value in params.items()}
    result = loss_fn(leaves)
    loss, aux = result if has_aux else (result, None)
    if not isinstance(loss, Var):
        zero = {name: np.zeros_like(value_of(v)) for name, v in params.items()}
        return (float(loss), aux, zero) if has_aux else (float(loss), zero)
    grads = backward(loss)
    bundle = {
        name: grads.get(id(leaf), np.zeros_like(leaf.value)).reshape(leaf.value.shape)
        for name, leaf in leaves.items()
    }
    if has_aux:
        return float(loss), aux, bundle
    return float(loss), bundle


def reverse_gradients(loss_fn: Callable, params: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Exact gradients of the scalar ``loss_fn(params)``, one array per parameter."""
    return value_and_grad(loss_fn, params)[1]
