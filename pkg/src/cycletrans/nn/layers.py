"""Functional neural-net layers with explicit backward passes.

Everything operates on a single sequence in float64. Parameters are plain
ndarrays owned by the calling model; backward functions accumulate gradients
into the arrays they are handed, so batch averaging is the caller's job.
"""

import numpy as np

from . import kernels


def softmax(z):
    e = np.exp(z - np.max(z))
    return e / e.sum()


def log_softmax(z):
    shifted = z - np.max(z)
    return shifted - np.log(np.exp(shifted).sum())


def softmax_rows(z):
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def log_softmax_rows(z):
    shifted = z - z.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softmax_vjp(alpha, dalpha):
    """Backward of alpha = softmax(e) given d(loss)/d(alpha)."""
    return alpha * (dalpha - np.dot(alpha, dalpha))


def embed(table, ids):
    return table[ids]


def embed_backward(dtable, ids, dxs):
    np.add.at(dtable, ids, dxs)


class LstmCache:
    """Per-sequence activations retained for the backward pass."""

    __slots__ = ("xs", "hs", "cs", "acts", "h0", "c0")

    def __init__(self, xs, hs, cs, acts, h0, c0):
        self.xs = xs
        self.hs = hs
        self.cs = cs
        self.acts = acts
        self.h0 = h0
        self.c0 = c0


def lstm_forward(xs, wx, wh, b, h0=None, c0=None):
    """Run an LSTM over xs (T, E); returns hidden states (T, H) and a cache.

    Gate layout in the 4H dimension is [input | forget | cell | output].
    """
    steps = xs.shape[0]
    hidden = wh.shape[0]
    hs = np.empty((steps, hidden))
    cs = np.empty((steps, hidden))
    acts = np.empty((steps, 4 * hidden))
    h = np.zeros(hidden) if h0 is None else h0
    c = np.zeros(hidden) if c0 is None else c0
    preact = xs @ wx + b
    for t in range(steps):
        z = preact[t] + h @ wh
        kernels.lstm_gates_forward(z, c, acts[t], hs[t], cs[t])
        h = hs[t]
        c = cs[t]
    return hs, LstmCache(xs, hs, cs, acts, h0, c0)


def lstm_backward(dhs, cache, wx, wh, dwx, dwh, db, dc_last=None):
    """Backpropagate through lstm_forward.

    dhs (T, H) carries the gradient arriving at every hidden state; dc_last
    optionally injects gradient at the final cell state. Accumulates into
    dwx, dwh, db and returns (dxs, dh0, dc0).
    """
    steps, hidden = dhs.shape
    dxs = np.empty_like(cache.xs)
    dz = np.empty(4 * hidden)
    dc_prev = np.empty(hidden)
    dh_carry = np.zeros(hidden)
    dc_carry = np.zeros(hidden) if dc_last is None else dc_last.copy()
    zeros = np.zeros(hidden)
    for t in range(steps - 1, -1, -1):
        dh = dhs[t] + dh_carry
        if t == 0:
            c_prev = cache.c0 if cache.c0 is not None else zeros
            h_prev = cache.h0 if cache.h0 is not None else zeros
        else:
            c_prev = cache.cs[t - 1]
            h_prev = cache.hs[t - 1]
        kernels.lstm_gates_backward(dh, dc_carry, cache.acts[t], c_prev, cache.cs[t], dz, dc_prev)
        dwx += np.outer(cache.xs[t], dz)
        dwh += np.outer(h_prev, dz)
        db += dz
        dxs[t] = wx @ dz
        dh_carry = wh @ dz
        dc_carry = dc_prev.copy()
    return dxs, dh_carry, dc_carry
