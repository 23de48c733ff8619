"""Primitive operations: forward rule, shape check and vector-Jacobian product.

Each primitive works on raw ``numpy`` arrays. ``vjp(g, out, *inputs, **attrs)``
returns one gradient (or ``None``) per input, already reduced to that input's
shape.

Implicit broadcasting in the elementwise binary ops is limited to trailing
dimension expansion: the smaller operand's shape must equal a suffix of the
larger one's. Anything else has to go through ``broadcast`` explicitly.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from gqa.errors import ContractError, DimensionError


@dataclass(frozen=True)
class Primitive:
    name: str
    forward: Callable[..., np.ndarray]
    vjp: Callable[..., tuple]
    check: Callable[[str, list, dict], None]


REGISTRY: dict[str, Primitive] = {}


def _no_check(kind, arrays, attrs):
    pass


def _register(name, forward, vjp, check=_no_check, arity=None):
    def checked(kind, arrays, attrs):
        if arity is not None and len(arrays) != arity:
            raise ContractError(f"{kind} takes {arity} input(s), got {len(arrays)}")
        check(kind, arrays, attrs)

    REGISTRY[name] = Primitive(name, forward, vjp, checked)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``g`` over the leading axes that trailing expansion added."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    return g


def _suffix_check(kind, arrays, attrs):
    a, b = arrays
    if a.shape == b.shape:
        return
    big, small = (a, b) if a.ndim >= b.ndim else (b, a)
    if small.ndim == 0 or big.shape[big.ndim - small.ndim:] == small.shape:
        return
    raise DimensionError(f"{kind}: shapes {a.shape} and {b.shape} are not trailing-broadcast compatible")


# --- elementwise binary -------------------------------------------------------

def _add_vjp(g, out, a, b):
    return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)


def _sub_vjp(g, out, a, b):
    return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)


def _mul_vjp(g, out, a, b):
    return _unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape)


def _div_vjp(g, out, a, b):
    return _unbroadcast(g / b, a.shape), _unbroadcast(-g * a / (b * b), b.shape)


_register("add", np.add, _add_vjp, _suffix_check, arity=2)
_register("sub", np.subtract, _sub_vjp, _suffix_check, arity=2)
_register("elementwise_mul", np.multiply, _mul_vjp, _suffix_check, arity=2)


def _div_forward(a, b):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.divide(a, b)


_register("div", _div_forward, _div_vjp, _suffix_check, arity=2)


# --- matmul -------------------------------------------------------------------

def _matmul_check(kind, arrays, attrs):
    a, b = arrays
    ok = a.ndim >= 2 and b.ndim >= 2 and a.shape[-1] == b.shape[-2]
    if ok and b.ndim > 2:
        ok = a.ndim == b.ndim and a.shape[:-2] == b.shape[:-2]
    if not ok:
        raise DimensionError(f"{kind}: cannot multiply shapes {a.shape} and {b.shape}")


def _matmul_vjp(g, out, a, b):
    ga = g @ np.swapaxes(b, -1, -2)
    if b.ndim == 2 and a.ndim > 2:
        gb = a.reshape(-1, a.shape[-1]).T @ g.reshape(-1, g.shape[-1])
    else:
        gb = np.swapaxes(a, -1, -2) @ g
    return ga, gb


_register("matmul", np.matmul, _matmul_vjp, _matmul_check, arity=2)


# --- structural -------------------------------------------------------------------

def _concat_forward(*arrays, axis=0):
    return np.concatenate(arrays, axis=axis)


def _concat_check(kind, arrays, attrs):
    if not arrays:
        raise ContractError(f"{kind} needs at least one input")
    axis = attrs.get("axis", 0)
    ref = arrays[0]
    for a in arrays[1:]:
        if a.ndim != ref.ndim or any(
            x != y for i, (x, y) in enumerate(zip(a.shape, ref.shape)) if i != axis % ref.ndim
        ):
            raise DimensionError(f"{kind}: shapes {ref.shape} and {a.shape} differ off axis {axis}")


def _concat_vjp(g, out, *arrays, axis=0):
    bounds = np.cumsum([a.shape[axis] for a in arrays])[:-1]
    return tuple(np.split(g, bounds, axis=axis))


_register("concat", _concat_forward, _concat_vjp, _concat_check)


def _is_basic_index(index) -> bool:
    items = index if isinstance(index, tuple) else (index,)
    return all(isinstance(i, (int, np.integer, slice)) or i is None or i is Ellipsis for i in items)


def _slice_forward(a, index=None):
    return np.array(a[index], dtype=np.float64)


def _slice_check(kind, arrays, attrs):
    try:
        np.empty(arrays[0].shape, dtype=np.bool_)[attrs["index"]]
    except (IndexError, TypeError, ValueError) as exc:
        raise DimensionError(f"{kind}: index {attrs['index']!r} invalid for shape {arrays[0].shape}: {exc}") from None


def _slice_vjp(g, out, a, index=None):
    ga = np.zeros_like(a)
    if _is_basic_index(index):
        ga[index] = g
    else:
        np.add.at(ga, index, g)
    return (ga,)


_register("slice", _slice_forward, _slice_vjp, _slice_check, arity=1)


def _reshape_check(kind, arrays, attrs):
    a = arrays[0]
    try:
        np.empty(a.shape, dtype=np.bool_).reshape(attrs["shape"])
    except ValueError:
        raise DimensionError(f"{kind}: cannot reshape {a.shape} to {attrs['shape']}") from None


_register(
    "reshape",
    lambda a, shape=None: a.reshape(shape).copy(),
    lambda g, out, a, shape=None: (g.reshape(a.shape),),
    _reshape_check,
    arity=1,
)


def _transpose_vjp(g, out, a, axes=None):
    if axes is None:
        return (np.transpose(g),)
    return (np.transpose(g, np.argsort(axes)),)


_register(
    "transpose",
    lambda a, axes=None: np.ascontiguousarray(np.transpose(a, axes)),
    _transpose_vjp,
    arity=1,
)


def _broadcast_check(kind, arrays, attrs):
    a, shape = arrays[0], tuple(attrs["shape"])
    lead = len(shape) - a.ndim
    if lead < 0 or any(s != 1 and s != t for s, t in zip(a.shape, shape[lead:])):
        raise DimensionError(f"{kind}: cannot broadcast {a.shape} to {shape}")


def _broadcast_vjp(g, out, a, shape=None):
    lead = len(shape) - a.ndim
    if lead:
        g = g.sum(axis=tuple(range(lead)))
    axes = tuple(i for i, s in enumerate(a.shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return (g,)


_register(
    "broadcast",
    lambda a, shape=None: np.broadcast_to(a, shape).copy(),
    _broadcast_vjp,
    _broadcast_check,
    arity=1,
)


# --- reductions ---------------------------------------------------------------------

def _restore_axes(g, shape, axis, keepdims):
    if axis is None:
        return np.broadcast_to(g.reshape((1,) * len(shape)), shape)
    if not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape)


def _reduce_check(kind, arrays, attrs):
    a, axis = arrays[0], attrs.get("axis")
    axes = () if axis is None else (axis if isinstance(axis, tuple) else (axis,))
    for ax in axes:
        if not -a.ndim <= ax < a.ndim:
            raise DimensionError(f"{kind}: axis {ax} out of range for shape {a.shape}")
    if kind == "max" and a.size == 0:
        raise DimensionError(f"{kind}: empty input of shape {a.shape}")


def _sum_vjp(g, out, a, axis=None, keepdims=False):
    return (_restore_axes(g, a.shape, axis, keepdims).copy(),)


def _mean_vjp(g, out, a, axis=None, keepdims=False):
    count = a.size // max(out.size, 1) if a.size else 1
    return (_restore_axes(g, a.shape, axis, keepdims) / count,)


def _max_forward(a, axis=None, keepdims=False):
    return np.asarray(np.max(a, axis=axis, keepdims=keepdims), dtype=np.float64)


def _max_vjp(g, out, a, axis=None, keepdims=False):
    ga = np.zeros_like(a)
    if axis is None:
        ga.flat[int(np.argmax(a))] = np.asarray(g).reshape(-1)[0]
        return (ga,)
    idx = np.expand_dims(np.argmax(a, axis=axis), axis)
    gk = g if keepdims else np.expand_dims(g, axis)
    np.put_along_axis(ga, idx, gk, axis=axis)
    return (ga,)


_register(
    "sum",
    lambda a, axis=None, keepdims=False: np.asarray(np.sum(a, axis=axis, keepdims=keepdims)),
    _sum_vjp,
    _reduce_check,
    arity=1,
)
_register(
    "mean",
    lambda a, axis=None, keepdims=False: np.asarray(np.mean(a, axis=axis, keepdims=keepdims)),
    _mean_vjp,
    _reduce_check,
    arity=1,
)
_register("max", _max_forward, _max_vjp, _reduce_check, arity=1)


# --- elementwise nonlinearities ---------------------------------------------------------

def _sigmoid(x):
    # symmetric form: never exponentiates a positive number
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def _softplus(x):
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


_register("sigmoid", _sigmoid, lambda g, out, a: (g * out * (1.0 - out),), arity=1)
_register("tanh", np.tanh, lambda g, out, a: (g * (1.0 - out * out),), arity=1)
_register("softplus", _softplus, lambda g, out, a: (g * _sigmoid(a),), arity=1)


def _softmax(a, axis=-1):
    shifted = a - np.max(a, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def _softmax_vjp(g, out, a, axis=-1):
    return (out * (g - np.sum(g * out, axis=axis, keepdims=True)),)


def _log_softmax(a, axis=-1):
    shifted = a - np.max(a, axis=axis, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))


def _log_softmax_vjp(g, out, a, axis=-1):
    return (g - np.exp(out) * np.sum(g, axis=axis, keepdims=True),)


def _axis_check(kind, arrays, attrs):
    a, axis = arrays[0], attrs.get("axis", -1)
    if a.ndim == 0 or not -a.ndim <= axis < a.ndim:
        raise DimensionError(f"{kind}: axis {axis} invalid for shape {a.shape}")


_register("softmax", _softmax, _softmax_vjp, _axis_check, arity=1)
_register("log_softmax", _log_softmax, _log_softmax_vjp, _axis_check, arity=1)


# --- fused recurrence -------------------------------------------------------------------

def _lstm_check(kind, arrays, attrs):
    proj, h0, c0, w_hh = arrays
    ok = proj.ndim == 4 and h0.ndim == 3 and proj.shape[-1] % 4 == 0
    if ok:
        D, _, n, four_h = proj.shape
        H = four_h // 4
        ok = h0.shape == (D, n, H) and c0.shape == (D, n, H) and w_hh.shape == (D, H, four_h)
    if not ok:
        raise DimensionError(
            f"{kind}: incompatible shapes proj {proj.shape}, h0 {h0.shape}, c0 {c0.shape}, w_hh {w_hh.shape}"
        )


def _lstm_run(proj, h0, c0, w_hh):
    """Forward recurrence; returns hidden states plus what the backward pass needs."""
    D, T, n, four_h = proj.shape
    H = four_h // 4
    hs = np.empty((D, T, n, H))
    cs = np.empty((D, T, n, H))
    acts = np.empty((D, T, n, four_h))
    h, c = h0, c0
    for t in range(T):
        gates = proj[:, t] + h @ w_hh
        a = np.empty_like(gates)
        a[..., : 3 * H] = _sigmoid(gates[..., : 3 * H])
        a[..., 3 * H:] = np.tanh(gates[..., 3 * H:])
        c = a[..., H: 2 * H] * c + a[..., :H] * a[..., 3 * H:]
        h = a[..., 2 * H: 3 * H] * np.tanh(c)
        hs[:, t], cs[:, t], acts[:, t] = h, c, a
    return hs, cs, acts


def _lstm_forward(proj, h0, c0, w_hh):
    return _lstm_run(proj, h0, c0, w_hh)[0]


def _lstm_vjp(g, out, proj, h0, c0, w_hh):
    hs, cs, acts = _lstm_run(proj, h0, c0, w_hh)
    D, T, n, four_h = proj.shape
    H = four_h // 4
    d_proj = np.empty_like(proj)
    d_w = np.zeros_like(w_hh)
    w_t = np.swapaxes(w_hh, -1, -2)
    dh_next = np.zeros_like(h0)
    dc_next = np.zeros_like(c0)
    for t in range(T - 1, -1, -1):
        a = acts[:, t]
        i, f, o, cand = a[..., :H], a[..., H: 2 * H], a[..., 2 * H: 3 * H], a[..., 3 * H:]
        c_prev = cs[:, t - 1] if t else c0
        h_prev = hs[:, t - 1] if t else h0
        tanh_c = np.tanh(cs[:, t])
        dh = g[:, t] + dh_next
        dc = dc_next + dh * o * (1.0 - tanh_c * tanh_c)
        dgates = np.concatenate(
            [
                dc * cand * i * (1.0 - i),
                dc * c_prev * f * (1.0 - f),
                dh * tanh_c * o * (1.0 - o),
                dc * i * (1.0 - cand * cand),
            ],
            axis=-1,
        )
        d_proj[:, t] = dgates
        d_w += np.swapaxes(h_prev, -1, -2) @ dgates
        dh_next = dgates @ w_t
        dc_next = dc * f
    return d_proj, dh_next, dc_next, d_w


_register("lstm_scan", _lstm_forward, _lstm_vjp, _lstm_check, arity=4)
