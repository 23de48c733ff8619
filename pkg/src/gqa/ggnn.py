"""Gated graph propagation over a dense adjacency, plus a soft-attention readout.

One propagation step, vectorized over the node rows of ``H``::

    a   = M @ H + b
    z   = sigmoid(a Wz^T + H Uz^T)
    r   = sigmoid(a Wr^T + H Ur^T)
    h~  = tanh(a W^T + (r * H) U^T)
    H'  = (1 - z) * H + z * h~

Matrices are stored in the orientation that multiplies a column vector
(``W @ a_v``), hence the transposes when acting on row-stacked nodes.
"""
from __future__ import annotations

from typing import Any

import numpy as np

from gqa.errors import ContractError, DimensionError, NumericError
from gqa.nn import Linear, Module, uniform, zeros
from gqa.numerics import Tensor, as_tensor, ops

READOUT_MODES = ("average", "gated_sum")


class GGNNParams(Module):
    def __init__(
        self,
        d_in: int,
        d_h: int,
        rng: np.random.Generator,
        n_steps: int = 3,
        d_out: int | None = None,
        readout: str = "average",
        candidate: str = "tanh",
    ):
        if d_h < d_in:
            raise ContractError(f"hidden size {d_h} must be >= input size {d_in}")
        if n_steps < 0:
            raise ContractError(f"n_steps must be >= 0, got {n_steps}")
        if readout not in READOUT_MODES:
            raise ContractError(f"readout must be one of {READOUT_MODES}")
        if candidate not in ("tanh", "identity"):
            raise ContractError("candidate activation must be 'tanh' or 'identity'")
        self.d_in, self.d_h, self.n_steps = d_in, d_h, n_steps
        self.readout, self.candidate = readout, candidate
        self.W = uniform(rng, (d_h, d_h), d_h, "W")
        self.U = uniform(rng, (d_h, d_h), d_h, "U")
        self.Wz = uniform(rng, (d_h, d_h), d_h, "Wz")
        self.Uz = uniform(rng, (d_h, d_h), d_h, "Uz")
        self.Wr = uniform(rng, (d_h, d_h), d_h, "Wr")
        self.Ur = uniform(rng, (d_h, d_h), d_h, "Ur")
        self.b = zeros((d_h,), "b")
        self.d_out = d_out
        if d_out is not None:
            self.pool_i = Linear(d_h + d_in, 1, rng)
            self.pool_j = Linear(d_h + d_in, d_out, rng)


def _adjacency(A: Any) -> np.ndarray:
    return np.asarray(getattr(A, "M", A), dtype=np.float64)


def initial_state(X: Tensor, d_h: int) -> Tensor:
    """Node inputs zero-padded to the hidden width."""
    n, d_in = X.shape
    if d_h == d_in:
        return X
    return ops.concat([X, Tensor(np.zeros((n, d_h - d_in)))], axis=1)


def propagate(X, A, params: GGNNParams, history: list | None = None) -> Tensor:
    """Run ``params.n_steps`` gated updates and return the final node states.

    If ``history`` is a list, one dict of arrays (``h_prev``, ``z``,
    ``h_tilde``, ``h``) is appended per step.
    """
    X = as_tensor(X)
    M = _adjacency(A)
    if X.ndim != 2:
        raise DimensionError(f"propagate: node inputs must be 2-D, got shape {X.shape}")
    n, d_in = X.shape
    if M.shape != (n, n):
        raise DimensionError(f"propagate: adjacency shape {M.shape} does not match {n} nodes")
    if d_in != params.d_in:
        raise DimensionError(f"propagate: node input width {d_in} != parameter width {params.d_in}")

    H = initial_state(X, params.d_h)
    if params.n_steps == 0:
        return H
    adj = Tensor(M)
    WT, UT = ops.transpose(params.W), ops.transpose(params.U)
    WzT, UzT = ops.transpose(params.Wz), ops.transpose(params.Uz)
    WrT, UrT = ops.transpose(params.Wr), ops.transpose(params.Ur)
    for step in range(1, params.n_steps + 1):
        try:
            a = adj @ H + params.b
            z = ops.sigmoid(a @ WzT + H @ UzT)
            r = ops.sigmoid(a @ WrT + H @ UrT)
            pre = a @ WT + (r * H) @ UT
            h_tilde = ops.tanh(pre) if params.candidate == "tanh" else pre
            H_new = (1.0 - z) * H + z * h_tilde
        except NumericError as exc:
            raise NumericError(f"propagation step {step}: {exc}") from None
        if history is not None:
            history.append({"h_prev": H.data, "z": z.data, "h_tilde": h_tilde.data, "h": H_new.data})
        H = H_new
    return H


def attention_pool(H, X, params: GGNNParams) -> Tensor:
    """Gate-weighted readout of node states into a single ``d_out`` vector."""
    if params.d_out is None:
        raise ContractError("these GGNN parameters were built without a readout (d_out=None)")
    H, X = as_tensor(H), as_tensor(X)
    n = H.shape[0]
    if n == 0:
        raise ContractError("attention_pool needs at least one node")
    if X.shape[0] != n:
        raise DimensionError(f"attention_pool: {n} state rows but {X.shape[0]} input rows")
    joined = ops.concat([H, X], axis=1)
    gate = ops.sigmoid(params.pool_i(joined))
    content = ops.tanh(params.pool_j(joined))
    pooled = ops.sum(ops.broadcast(gate, content.shape) * content, axis=0)
    if params.readout == "gated_sum":
        return pooled
    return pooled / ops.sum(gate)
