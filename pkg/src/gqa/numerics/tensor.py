"""Dense float64 tensors and the tape that records primitive applications.

A :class:`Tensor` is an immutable value. Operations on tensors go through
:func:`apply_primitive`, which computes the forward result and, when a
:class:`Tape` is active and some input requires a gradient, appends a
:class:`Node` to that tape. :func:`backward` walks the tape in reverse.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from gqa.errors import ContractError, NumericError
from gqa.numerics import primitives

_local = threading.local()


def _tape_stack() -> list["Tape"]:
    stack = getattr(_local, "stack", None)
    if stack is None:
        stack = _local.stack = []
    return stack


def active_tape() -> "Tape | None":
    stack = _tape_stack()
    return stack[-1] if stack else None


class Tensor:
    """Immutable float64 array with an optional handle into the active tape."""

    __slots__ = ("data", "requires_grad", "name", "tape_id", "_tape", "__weakref__")

    def __init__(self, data: Any, requires_grad: bool = False, name: str | None = None):
        arr = np.array(data, dtype=np.float64)
        if not np.isfinite(arr).all():
            raise NumericError(f"non-finite values in tensor {name or ''}".strip())
        self.data = arr
        self.requires_grad = requires_grad
        self.name = name
        self.tape_id: int | None = None
        self._tape: Tape | None = None

    @classmethod
    def _wrap(cls, arr: np.ndarray, requires_grad: bool = False) -> "Tensor":
        t = cls.__new__(cls)
        t.data = arr
        t.requires_grad = requires_grad
        t.name = None
        t.tape_id = None
        t._tape = None
        return t

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return self._tape is None

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def __repr__(self) -> str:
        tag = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

    # Arithmetic sugar; everything routes through apply_primitive.
    def __add__(self, other):
        return apply_primitive("add", [self, other])

    def __radd__(self, other):
        return apply_primitive("add", [other, self])

    def __sub__(self, other):
        return apply_primitive("sub", [self, other])

    def __rsub__(self, other):
        return apply_primitive("sub", [other, self])

    def __mul__(self, other):
        return apply_primitive("elementwise_mul", [self, other])

    def __rmul__(self, other):
        return apply_primitive("elementwise_mul", [other, self])

    def __truediv__(self, other):
        return apply_primitive("div", [self, other])

    def __rtruediv__(self, other):
        return apply_primitive("div", [other, self])

    def __neg__(self):
        return apply_primitive("sub", [0.0, self])

    def __matmul__(self, other):
        return apply_primitive("matmul", [self, other])

    def __getitem__(self, index):
        return apply_primitive("slice", [self], index=index)

    @property
    def T(self) -> "Tensor":
        return apply_primitive("transpose", [self])

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return apply_primitive("reshape", [self], shape=tuple(shape))

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        return apply_primitive("sum", [self], axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        return apply_primitive("mean", [self], axis=axis, keepdims=keepdims)


def Parameter(data: Any, name: str | None = None) -> Tensor:
    """A leaf tensor whose gradient :func:`backward` reports."""
    return Tensor(data, requires_grad=True, name=name)


def as_tensor(x: Any) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


@dataclass(frozen=True)
class Node:
    kind: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    attrs: dict = field(default_factory=dict)


class Tape:
    """Ordered record of primitive applications.

    Nodes are appended as they execute, so every node's inputs precede it.
    Use as a context manager; tapes nest, the innermost one records.
    """

    def __init__(self):
        self.nodes: list[Node] = []
        self.leaves: dict[int, Tensor] = {}

    def __enter__(self) -> "Tape":
        _tape_stack().append(self)
        return self

    def __exit__(self, *exc) -> None:
        stack = _tape_stack()
        if not stack or stack[-1] is not self:
            raise ContractError("tape stack corrupted: exiting a tape that is not innermost")
        stack.pop()

    def __len__(self) -> int:
        return len(self.nodes)

    def record(self, kind: str, inputs: tuple[Tensor, ...], output: Tensor, attrs: dict) -> None:
        for t in inputs:
            if t.requires_grad and t._tape is None:
                self.leaves.setdefault(id(t), t)
        output.tape_id = len(self.nodes)
        output._tape = self
        self.nodes.append(Node(kind, inputs, output, attrs))

    def replay(self) -> bool:
        """Recompute every node from its recorded inputs; True iff all match bit-exactly."""
        for node in self.nodes:
            prim = primitives.REGISTRY[node.kind]
            again = prim.forward(*(t.data for t in node.inputs), **node.attrs)
            if again.shape != node.output.data.shape or not np.array_equal(again, node.output.data):
                return False
        return True


def apply_primitive(kind: str, inputs: Sequence[Any], **attrs) -> Tensor:
    """Apply primitive ``kind`` to ``inputs`` and record it on the active tape."""
    try:
        prim = primitives.REGISTRY[kind]
    except KeyError:
        raise ContractError(f"unknown primitive {kind!r}") from None
    tensors = tuple(as_tensor(x) for x in inputs)
    arrays = [t.data for t in tensors]
    prim.check(kind, arrays, attrs)
    out = prim.forward(*arrays, **attrs)
    if not np.isfinite(out).all():
        raise NumericError(f"{kind} produced non-finite output (input shapes {[a.shape for a in arrays]})")
    tape = active_tape()
    needs_grad = tape is not None and any(t.requires_grad for t in tensors)
    result = Tensor._wrap(out, requires_grad=needs_grad)
    if needs_grad:
        tape.record(kind, tensors, result, attrs)
    return result


def backward(tape: Tape, root: Tensor, params: Iterable[Tensor] = ()) -> dict[Tensor, Tensor]:
    """Gradients of scalar ``root`` with respect to every parameter leaf.

    Returns a map from each parameter leaf seen on the tape (plus any in
    ``params``) to its gradient. Leaves that ``root`` does not depend on get
    zeros.
    """
    if root.size != 1:
        raise ContractError(f"backward needs a scalar root, got shape {root.shape}")
    wanted: dict[int, Tensor] = dict(tape.leaves)
    for p in params:
        wanted.setdefault(id(p), p)

    grads: dict[int, np.ndarray] = {}
    if root._tape is tape:
        grads[id(root)] = np.ones_like(root.data)
        for node in reversed(tape.nodes[: root.tape_id + 1]):
            g = grads.pop(id(node.output), None)
            if g is None:
                continue
            prim = primitives.REGISTRY[node.kind]
            in_grads = prim.vjp(g, node.output.data, *(t.data for t in node.inputs), **node.attrs)
            for t, gi in zip(node.inputs, in_grads):
                if gi is None or not t.requires_grad:
                    continue
                key = id(t)
                prev = grads.get(key)
                grads[key] = gi if prev is None else prev + gi
    elif root.requires_grad and id(root) in wanted:
        grads[id(root)] = np.ones_like(root.data)
    elif root.requires_grad or root._tape is not None:
        raise ContractError("root tensor was not recorded on this tape")

    return {
        t: Tensor._wrap(np.asarray(grads[k], dtype=np.float64).reshape(t.shape))
        if k in grads else Tensor._wrap(np.zeros_like(t.data))
        for k, t in wanted.items()
    }
