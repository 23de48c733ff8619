"""Functional front-end over the primitive registry."""
from __future__ import annotations

from typing import Sequence

from gqa.numerics.tensor import Tensor, apply_primitive


def matmul(a, b) -> Tensor:
    return apply_primitive("matmul", [a, b])


def add(a, b) -> Tensor:
    return apply_primitive("add", [a, b])


def sub(a, b) -> Tensor:
    return apply_primitive("sub", [a, b])


def mul(a, b) -> Tensor:
    return apply_primitive("elementwise_mul", [a, b])


def div(a, b) -> Tensor:
    return apply_primitive("div", [a, b])


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    return apply_primitive("concat", list(tensors), axis=axis)


def take(a, index) -> Tensor:
    """``a[index]`` with any numpy index (slices, integer arrays)."""
    return apply_primitive("slice", [a], index=index)


def reshape(a, shape) -> Tensor:
    return apply_primitive("reshape", [a], shape=tuple(shape))


def transpose(a, axes=None) -> Tensor:
    return apply_primitive("transpose", [a], axes=None if axes is None else tuple(axes))


def broadcast(a, shape) -> Tensor:
    return apply_primitive("broadcast", [a], shape=tuple(shape))


def sigmoid(a) -> Tensor:
    return apply_primitive("sigmoid", [a])


def tanh(a) -> Tensor:
    return apply_primitive("tanh", [a])


def softplus(a) -> Tensor:
    return apply_primitive("softplus", [a])


def softmax(a, axis: int = -1) -> Tensor:
    return apply_primitive("softmax", [a], axis=axis)


def log_softmax(a, axis: int = -1) -> Tensor:
    return apply_primitive("log_softmax", [a], axis=axis)


def sum(a, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    return apply_primitive("sum", [a], axis=axis, keepdims=keepdims)


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    return apply_primitive("mean", [a], axis=axis, keepdims=keepdims)


def max(a, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    return apply_primitive("max", [a], axis=axis, keepdims=keepdims)


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    expanded = []
    for t in tensors:
        shape = list(t.shape)
        shape.insert(axis if axis >= 0 else len(shape) + 1 + axis, 1)
        expanded.append(reshape(t, shape))
    return concat(expanded, axis=axis)


def lstm_scan(proj, h0, c0, w_hh) -> Tensor:
    """LSTM recurrence over axis 1 of ``proj`` (D, T, n, 4H); gate order i, f, o, g.

    Returns the hidden state at every step, shape (D, T, n, H).
    """
    return apply_primitive("lstm_scan", [proj, h0, c0, w_hh])
