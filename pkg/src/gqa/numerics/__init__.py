"""Reverse-mode differentiation over dense float64 tensors."""
from gqa.numerics.gradcheck import grad_check
from gqa.numerics.tensor import Node, Parameter, Tape, Tensor, active_tape, apply_primitive, as_tensor, backward

__all__ = [
    "Node",
    "Parameter",
    "Tape",
    "Tensor",
    "active_tape",
    "apply_primitive",
    "as_tensor",
    "backward",
    "grad_check",
]
