import math

import numpy as np
import pytest

from gqa.errors import ContractError, DimensionError
from gqa.ggnn import GGNNParams, attention_pool, propagate
from gqa.numerics import grad_check, ops


def _zero(params):
    for p in params.parameters():
        p.data = np.zeros_like(p.data)
    return params


def _sig(x):
    return 1.0 / (1.0 + math.exp(-x))


def loop_propagate(X, M, p):
    """Per-node scalar re-implementation of the six gated update rules."""
    n, d_in = X.shape
    d_h = p.d_h
    W, U, Wz, Uz, Wr, Ur, b = (t.data for t in (p.W, p.U, p.Wz, p.Uz, p.Wr, p.Ur, p.b))
    h = [[float(X[v][k]) if k < d_in else 0.0 for k in range(d_h)] for v in range(n)]
    for _ in range(p.n_steps):
        new = []
        for v in range(n):
            a = [sum(M[u][v] * h[u][k] for u in range(n)) + b[k] for k in range(d_h)]
            z = [_sig(sum(Wz[i][k] * a[k] + Uz[i][k] * h[v][k] for k in range(d_h))) for i in range(d_h)]
            r = [_sig(sum(Wr[i][k] * a[k] + Ur[i][k] * h[v][k] for k in range(d_h))) for i in range(d_h)]
            rh = [r[k] * h[v][k] for k in range(d_h)]
            ht = [math.tanh(sum(W[i][k] * a[k] + U[i][k] * rh[k] for k in range(d_h))) for i in range(d_h)]
            new.append([(1 - z[i]) * h[v][i] + z[i] * ht[i] for i in range(d_h)])
        h = new
    return np.array(h)


def loop_pool(H, X, p):
    wi, bi = p.pool_i.weight.data, p.pool_i.bias.data
    wj, bj = p.pool_j.weight.data, p.pool_j.bias.data
    num = [0.0] * p.d_out
    den = 0.0
    for v in range(H.shape[0]):
        u = list(H[v]) + list(X[v])
        g = _sig(sum(u[k] * wi[k][0] for k in range(len(u))) + bi[0])
        for o in range(p.d_out):
            c = math.tanh(sum(u[k] * wj[k][o] for k in range(len(u))) + bj[o])
            num[o] += g * c
        den += g
    return np.array(num) / den


def _sym(rng, n):
    A = rng.uniform(-1, 1, size=(n, n))
    return 0.5 * A.T @ A


@pytest.mark.parametrize("T", [0, 1, 2, 3])
def test_zero_parameters_halve_each_step(T):
    rng = np.random.default_rng(T)
    X = rng.normal(size=(5, 3))
    p = _zero(GGNNParams(3, 4, rng, n_steps=T))
    out = propagate(X, _sym(rng, 5), p).data
    expected = np.hstack([X, np.zeros((5, 1))]) / 2**T
    assert np.abs(out - expected).max() <= 1e-12


def test_zero_steps_returns_padding_exactly():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(3, 2))
    out = propagate(X, np.eye(3), GGNNParams(2, 5, rng, n_steps=0)).data
    np.testing.assert_array_equal(out, np.hstack([X, np.zeros((3, 3))]))


def test_vectorized_matches_loop_reference_instance():
    rng = np.random.default_rng(42)
    p = GGNNParams(3, 4, rng, n_steps=3)
    X, M = rng.normal(size=(5, 3)), _sym(rng, 5)
    np.testing.assert_allclose(propagate(X, M, p).data, loop_propagate(X, M, p), rtol=0, atol=1e-10)


def test_vectorized_matches_loop_fifty_trials():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = int(rng.integers(1, 7))
        d_in = int(rng.integers(1, 5))
        d_h = d_in + int(rng.integers(0, 3))
        p = GGNNParams(d_in, d_h, rng, n_steps=int(rng.integers(0, 4)), d_out=int(rng.integers(1, 4)))
        for t in p.parameters():
            t.data = rng.normal(size=t.shape)
        X, M = rng.normal(size=(n, d_in)), _sym(rng, n)
        H = propagate(X, M, p)
        np.testing.assert_allclose(H.data, loop_propagate(X, M, p), rtol=0, atol=1e-10)
        np.testing.assert_allclose(attention_pool(H, X, p).data, loop_pool(H.data, X, p), rtol=0, atol=1e-10)


def test_decoupled_nodes_permute():
    rng = np.random.default_rng(3)
    p = GGNNParams(3, 3, rng, n_steps=2)
    p.b.data = np.zeros(3)
    X = rng.normal(size=(6, 3))
    perm = rng.permutation(6)
    out = propagate(X, np.zeros((6, 6)), p).data
    np.testing.assert_array_equal(propagate(X[perm], np.zeros((6, 6)), p).data, out[perm])


def test_update_interpolates():
    rng = np.random.default_rng(4)
    for _ in range(30):
        p = GGNNParams(3, 5, rng, n_steps=3)
        hist = []
        propagate(rng.normal(size=(4, 3)), _sym(rng, 4), p, history=hist)
        assert len(hist) == 3
        for step in hist:
            lo = np.minimum(step["h_prev"], step["h_tilde"])
            hi = np.maximum(step["h_prev"], step["h_tilde"])
            assert np.all(step["h"] >= lo - 1e-15) and np.all(step["h"] <= hi + 1e-15)


def test_pool_single_node_ignores_gate():
    rng = np.random.default_rng(5)
    p = GGNNParams(2, 3, rng, n_steps=1, d_out=4)
    H, X = rng.normal(size=(1, 3)), rng.normal(size=(1, 2))
    expected = np.tanh(np.hstack([H, X]) @ p.pool_j.weight.data + p.pool_j.bias.data)[0]
    np.testing.assert_allclose(attention_pool(H, X, p).data, expected, atol=1e-15)


def test_pool_zero_gate_network_is_plain_mean():
    rng = np.random.default_rng(6)
    p = GGNNParams(2, 3, rng, n_steps=1, d_out=4)
    _zero(p.pool_i)
    H, X = rng.normal(size=(5, 3)), rng.normal(size=(5, 2))
    c = np.tanh(np.hstack([H, X]) @ p.pool_j.weight.data + p.pool_j.bias.data)
    np.testing.assert_allclose(attention_pool(H, X, p).data, c.mean(axis=0), atol=1e-15)


def test_pool_output_bounded():
    rng = np.random.default_rng(8)
    for _ in range(30):
        p = GGNNParams(3, 3, rng, n_steps=1, d_out=5)
        for t in p.parameters():
            t.data = rng.normal(scale=3, size=t.shape)
        out = attention_pool(rng.normal(size=(4, 3)), rng.normal(size=(4, 3)), p).data
        assert np.all(np.abs(out) < 1)


def test_gated_sum_mode():
    rng = np.random.default_rng(9)
    p = GGNNParams(2, 2, rng, n_steps=1, d_out=3, readout="gated_sum")
    H, X = rng.normal(size=(3, 2)), rng.normal(size=(3, 2))
    u = np.hstack([H, X])
    g = 1 / (1 + np.exp(-(u @ p.pool_i.weight.data + p.pool_i.bias.data)))
    c = np.tanh(u @ p.pool_j.weight.data + p.pool_j.bias.data)
    np.testing.assert_allclose(attention_pool(H, X, p).data, (g * c).sum(axis=0), atol=1e-14)


def test_identity_candidate_flag():
    rng = np.random.default_rng(10)
    p = GGNNParams(2, 2, rng, n_steps=1, candidate="identity")
    hist = []
    propagate(rng.normal(size=(3, 2)), np.eye(3), p, history=hist)
    assert np.isfinite(hist[0]["h_tilde"]).all()


def test_errors():
    rng = np.random.default_rng(11)
    p = GGNNParams(2, 3, rng, n_steps=1, d_out=2)
    with pytest.raises(DimensionError):
        propagate(np.ones((3, 2)), np.eye(4), p)
    with pytest.raises(DimensionError):
        propagate(np.ones((3, 3)), np.eye(3), p)
    with pytest.raises(ContractError):
        attention_pool(np.ones((0, 3)), np.ones((0, 2)), p)
    with pytest.raises(ContractError):
        GGNNParams(4, 3, rng)


def test_gradient_through_propagate_and_pool():
    rng = np.random.default_rng(12)
    # n >= 2: with one node the gate cancels exactly and only FD round-off remains
    for n, d_in, d_h, T in [(6, 4, 6, 3), (3, 2, 3, 2), (2, 3, 3, 1)]:
        p = GGNNParams(d_in, d_h, rng, n_steps=T, d_out=3)
        for t in p.parameters():
            t.data = rng.normal(scale=0.7, size=t.shape)
        X, M = rng.normal(size=(n, d_in)), _sym(rng, n)
        target = rng.normal(size=3)

        def loss(_):
            out = attention_pool(propagate(X, M, p), X, p)
            return ops.sum(out * target)

        assert grad_check(loss, p.parameters(), step=1e-5) < 1e-4
