"""Pure-numpy reference implementation of the pointwise hot kernels.

These functions share their exact signature with the compiled versions in
_fastkernels.pyx; cycletrans.nn.kernels picks one implementation at import.
All buffers are 1-D contiguous float64 and outputs are written in place.
"""

import numpy as np


def lstm_gates_forward(z, c_prev, acts, h_out, c_out):
    """Fused LSTM gate math for one step.

    z holds the 4H pre-activations laid out as [input | forget | cell | output].
    Writes the activated gates into ``acts`` (same layout) and the new hidden
    and cell state into ``h_out`` / ``c_out``.
    """
    hidden = c_prev.shape[0]
    i = 1.0 / (1.0 + np.exp(-z[:hidden]))
    f = 1.0 / (1.0 + np.exp(-z[hidden : 2 * hidden]))
    g = np.tanh(z[2 * hidden : 3 * hidden])
    o = 1.0 / (1.0 + np.exp(-z[3 * hidden :]))
    acts[:hidden] = i
    acts[hidden : 2 * hidden] = f
    acts[2 * hidden : 3 * hidden] = g
    acts[3 * hidden :] = o
    np.multiply(f, c_prev, out=c_out)
    c_out += i * g
    np.multiply(o, np.tanh(c_out), out=h_out)


def lstm_gates_backward(dh, dc_in, acts, c_prev, c_new, dz_out, dc_prev_out):
    """Backward pass matching lstm_gates_forward.

    dh is the gradient arriving at the new hidden state, dc_in the gradient
    carried into the new cell state from the following step. Writes the
    pre-activation gradient into ``dz_out`` and the gradient w.r.t. the
    previous cell state into ``dc_prev_out``.
    """
    hidden = c_prev.shape[0]
    i = acts[:hidden]
    f = acts[hidden : 2 * hidden]
    g = acts[2 * hidden : 3 * hidden]
    o = acts[3 * hidden :]
    tc = np.tanh(c_new)
    dc = dc_in + dh * o * (1.0 - tc * tc)
    dz_out[:hidden] = (dc * g) * i * (1.0 - i)
    dz_out[hidden : 2 * hidden] = (dc * c_prev) * f * (1.0 - f)
    dz_out[2 * hidden : 3 * hidden] = (dc * i) * (1.0 - g * g)
    dz_out[3 * hidden :] = (dh * tc) * o * (1.0 - o)
    np.multiply(dc, f, out=dc_prev_out)


def adagrad_update(param, grad, accum, lr, eps):
    """One Adagrad step: accum += grad^2; param -= lr * grad / (sqrt(accum) + eps)."""
    accum += grad * grad
    param -= lr * grad / (np.sqrt(accum) + eps)
