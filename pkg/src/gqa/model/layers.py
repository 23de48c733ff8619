"""Text layers: character CNN, sentence-batched BiLSTM, bi-attention, self-attention."""
from __future__ import annotations

import numpy as np

from gqa.data import N_CHARS
from gqa.nn import Linear, Module, uniform, zeros
from gqa.numerics import Tensor, ops

NEG = -1e30
CHAR_WIDTH = 5


def char_windows(words: list[list[int]]) -> tuple[np.ndarray, np.ndarray]:
    """Width-5 character windows per word and an additive mask for padded windows.

    Words shorter than the filter are right-padded with the pad character;
    every word gets at least one valid window.
    """
    lengths = [max(len(w), CHAR_WIDTH) for w in words]
    n_win = max(lengths) - CHAR_WIDTH + 1
    padded = np.zeros((len(words), max(lengths)), dtype=np.int64)
    for i, w in enumerate(words):
        padded[i, : len(w)] = w
    offsets = np.arange(n_win)[:, None] + np.arange(CHAR_WIDTH)[None, :]
    windows = padded[:, offsets]
    mask = np.where(np.arange(n_win)[None, :] < (np.array(lengths) - CHAR_WIDTH + 1)[:, None], 0.0, NEG)
    return windows, mask


class CharCNN(Module):
    def __init__(self, char_emb_dim: int, out_dim: int, rng: np.random.Generator):
        self.table = uniform(rng, (N_CHARS, char_emb_dim), char_emb_dim, "table")
        self.conv = Linear(CHAR_WIDTH * char_emb_dim, out_dim, rng)

    def __call__(self, windows: np.ndarray, mask: np.ndarray) -> Tensor:
        n, n_win, width = windows.shape
        emb = ops.take(self.table, windows)  # (n, n_win, width, d_ce)
        flat = ops.reshape(emb, (n * n_win, width * self.table.shape[1]))
        feat = ops.tanh(self.conv(flat))
        feat = ops.reshape(feat, (n, n_win, self.conv.d_out))
        feat = feat + ops.broadcast(Tensor(mask[:, :, None]), feat.shape)
        return ops.max(feat, axis=1)


class SentenceIndex:
    """Gather indices that turn flat word rows into a padded (time, sentence) grid."""

    def __init__(self, lengths: list[int]):
        self.lengths = np.asarray(lengths, dtype=np.int64)
        self.n_sent = len(lengths)
        self.n_words = int(self.lengths.sum())
        self.max_len = int(self.lengths.max())
        starts = np.concatenate([[0], np.cumsum(self.lengths)[:-1]])
        t = np.arange(self.max_len)[:, None]
        valid = t < self.lengths[None, :]
        pad = self.n_words
        fwd = np.where(valid, starts[None, :] + t, pad)
        bwd = np.where(valid, starts[None, :] + self.lengths[None, :] - 1 - t, pad)
        self.grid = np.stack([fwd, bwd])  # (2, T, n_sent)
        sent_of_word = np.repeat(np.arange(self.n_sent), self.lengths)
        pos = np.arange(self.n_words) - starts[sent_of_word]
        n = self.n_sent
        self.word_rows = np.stack([pos * n + sent_of_word, (self.lengths[sent_of_word] - 1 - pos) * n + sent_of_word], axis=1)
        last = (self.lengths - 1) * n + np.arange(n)
        self.final_rows = np.stack([last, last], axis=1)
        self.dirs_w = np.broadcast_to(np.array([0, 1]), self.word_rows.shape)
        self.dirs_s = np.broadcast_to(np.array([0, 1]), self.final_rows.shape)
        self.sent_of_word = sent_of_word


class BiLSTM(Module):
    """Bidirectional LSTM run independently over every sentence, all sentences at once.

    Both directions are batched along a leading axis of size 2. When
    ``init_dim`` is given, the initial hidden and cell states of each
    sentence are linear maps of a per-sentence vector. ``fused`` selects the
    single-primitive recurrence; the unfused path builds the same cell from
    elementwise primitives, one tape node per gate operation.
    """

    fused = True

    def __init__(self, d_in: int, hidden: int, rng: np.random.Generator, init_dim: int | None = None):
        self.d_in, self.hidden = d_in, hidden
        self.w_ih = uniform(rng, (2, d_in, 4 * hidden), hidden, "w_ih")
        self.w_hh = uniform(rng, (2, hidden, 4 * hidden), hidden, "w_hh")
        self.bias = zeros((2, 1, 4 * hidden), "bias")
        self.init_dim = init_dim
        if init_dim is not None:
            self.init_h = Linear(init_dim, 2 * hidden, rng)
            self.init_c = Linear(init_dim, 2 * hidden, rng)

    def _initial(self, layer: Linear, init: Tensor) -> Tensor:
        n = init.shape[0]
        return ops.transpose(ops.reshape(layer(init), (n, 2, self.hidden)), (1, 0, 2))

    def __call__(self, x: Tensor, index: SentenceIndex, init: Tensor | None = None) -> tuple[Tensor, Tensor]:
        """Return (per-word outputs ``n_words x 2H``, final states ``n_sent x 2H``)."""
        H, n, T = self.hidden, index.n_sent, index.max_len
        padded = ops.concat([x, Tensor(np.zeros((1, x.shape[1])))], axis=0)
        grid = ops.take(padded, index.grid)  # (2, T, n, d)
        proj = ops.matmul(ops.reshape(grid, (2, T * n, self.d_in)), self.w_ih)
        proj = proj + ops.broadcast(self.bias, proj.shape)
        proj = ops.reshape(proj, (2, T, n, 4 * H))
        if init is None:
            h = c = Tensor(np.zeros((2, n, H)))
        else:
            h, c = self._initial(self.init_h, init), self._initial(self.init_c, init)
        if self.fused:
            seq = ops.reshape(ops.lstm_scan(proj, h, c, self.w_hh), (2, T * n, H))
        else:
            outputs = []
            for t in range(T):
                gates = proj[:, t] + ops.matmul(h, self.w_hh)
                ifo = ops.sigmoid(gates[:, :, : 3 * H])
                cand = ops.tanh(gates[:, :, 3 * H:])
                c = ifo[:, :, H: 2 * H] * c + ifo[:, :, :H] * cand
                h = ifo[:, :, 2 * H:] * ops.tanh(c)
                outputs.append(h)
            seq = ops.concat(outputs, axis=1)
        # rows of seq are laid out as t * n_sent + s
        words = ops.take(seq, (index.dirs_w, index.word_rows))
        finals = ops.take(seq, (index.dirs_s, index.final_rows))
        return (
            ops.reshape(words, (index.n_words, 2 * H)),
            ops.reshape(finals, (n, 2 * H)),
        )


def _trilinear(a: Tensor, b: Tensor, w_b: Tensor, w_ab: Tensor, w_a: Tensor | None = None) -> Tensor:
    """similarity[i, j] = w_a.a_i + w_b.b_j + w_ab.(a_i * b_j)"""
    n, m = a.shape[0], b.shape[0]
    sim = ops.matmul(a * w_ab, ops.transpose(b))
    sim = sim + ops.reshape(ops.matmul(b, w_b), (m,))
    if w_a is not None:
        sim = sim + ops.broadcast(ops.matmul(a, w_a), (n, m))
    return sim


class BiAttention(Module):
    """Context-to-query and query-to-context attention with trilinear similarity."""

    def __init__(self, d: int, rng: np.random.Generator):
        self.w_context = uniform(rng, (d, 1), d, "w_context")
        self.w_query = uniform(rng, (d, 1), d, "w_query")
        self.w_product = uniform(rng, (d,), d, "w_product")
        self.out = Linear(4 * d, d, rng)

    def __call__(self, context: Tensor, query: Tensor) -> Tensor:
        n, d = context.shape
        sim = _trilinear(context, query, self.w_query, self.w_product, self.w_context)
        c2q = ops.matmul(ops.softmax(sim, axis=1), query)
        weights = ops.softmax(ops.max(sim, axis=1))
        q2c = ops.matmul(ops.reshape(weights, (1, n)), context)
        q2c = ops.broadcast(q2c, (n, d))
        joined = ops.concat([context, c2q, context * c2q, context * q2c], axis=1)
        return ops.tanh(self.out(joined))


class SelfAttention(Module):
    """Every word attends over all other words of the document set.

    The per-query term of the trilinear score is left out: a softmax over
    keys is invariant to it.
    """

    def __init__(self, d: int, rng: np.random.Generator):
        self.w_key = uniform(rng, (d, 1), d, "w_key")
        self.w_product = uniform(rng, (d,), d, "w_product")
        self.out = Linear(3 * d, d, rng)

    def __call__(self, x: Tensor) -> Tensor:
        n = x.shape[0]
        sim = _trilinear(x, x, self.w_key, self.w_product)
        if n > 1:
            sim = sim + Tensor(np.diag(np.full(n, NEG)))
        attended = ops.matmul(ops.softmax(sim, axis=1), x)
        return ops.tanh(self.out(ops.concat([x, attended, x * attended], axis=1)))
