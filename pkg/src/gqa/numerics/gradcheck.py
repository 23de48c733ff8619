"""Central finite-difference gradient checking."""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from gqa.errors import ContractError
from gqa.numerics.tensor import Tape, Tensor, backward


def _scalar(value) -> float:
    return value.item() if isinstance(value, Tensor) else float(value)


def grad_check(
    loss_fn: Callable[[Sequence[Tensor]], Tensor],
    params: Sequence[Tensor],
    step: float = 1e-5,
    return_details: bool = False,
):
    """Worst relative error between tape gradients and central differences.

    Every coordinate of every parameter is perturbed by ``±step``. The
    relative error uses ``max(|analytic|, |numeric|, 1e-8)`` as denominator.
    Parameter values are restored afterwards.
    """
    if step <= 0:
        raise ContractError(f"step must be positive, got {step}")
    params = list(params)
    with Tape() as tape:
        loss = loss_fn(params)
    analytic = backward(tape, loss, params)
    base = _scalar(loss)
    if _scalar(loss_fn(params)) != base:
        raise ContractError("loss_fn is not deterministic: two identical calls disagree")

    worst = 0.0
    where = None
    for p_idx, p in enumerate(params):
        original = p.data
        grad = analytic[p].data.reshape(-1)
        try:
            for i in range(original.size):
                bumped = original.copy()
                bumped.flat[i] += step
                p.data = bumped
                f_plus = _scalar(loss_fn(params))
                bumped = original.copy()
                bumped.flat[i] -= step
                p.data = bumped
                f_minus = _scalar(loss_fn(params))
                numeric = (f_plus - f_minus) / (2.0 * step)
                denom = max(abs(grad[i]), abs(numeric), 1e-8)
                err = abs(grad[i] - numeric) / denom
                if err > worst:
                    worst, where = err, (p_idx, p.name, i, float(grad[i]), numeric)
        finally:
            p.data = original
    if return_details:
        return worst, where
    return worst
