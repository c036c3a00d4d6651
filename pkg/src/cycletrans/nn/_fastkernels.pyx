# Fused pointwise kernels for the recurrent cells and the optimizer.
# Semantics match cycletrans.nn.kernels_py exactly; keep both in sync.

from libc.math cimport exp, sqrt, tanh


cdef inline double _sigmoid(double x) noexcept nogil:
    return 1.0 / (1.0 + exp(-x))


def lstm_gates_forward(double[::1] z, double[::1] c_prev, double[::1] acts,
                       double[::1] h_out, double[::1] c_out):
    cdef Py_ssize_t hidden = c_prev.shape[0]
    cdef Py_ssize_t k
    cdef double i, f, g, o, c
    with nogil:
        for k in range(hidden):
            i = _sigmoid(z[k])
            f = _sigmoid(z[hidden + k])
            g = tanh(z[2 * hidden + k])
            o = _sigmoid(z[3 * hidden + k])
            acts[k] = i
            acts[hidden + k] = f
            acts[2 * hidden + k] = g
            acts[3 * hidden + k] = o
            c = f * c_prev[k] + i * g
            c_out[k] = c
            h_out[k] = o * tanh(c)


def lstm_gates_backward(double[::1] dh, double[::1] dc_in, double[::1] acts,
                        double[::1] c_prev, double[::1] c_new,
                        double[::1] dz_out, double[::1] dc_prev_out):
    cdef Py_ssize_t hidden = c_prev.shape[0]
    cdef Py_ssize_t k
    cdef double i, f, g, o, tc, dc
    with nogil:
        for k in range(hidden):
            i = acts[k]
            f = acts[hidden + k]
            g = acts[2 * hidden + k]
            o = acts[3 * hidden + k]
            tc = tanh(c_new[k])
            dc = dc_in[k] + dh[k] * o * (1.0 - tc * tc)
            dz_out[k] = (dc * g) * i * (1.0 - i)
            dz_out[hidden + k] = (dc * c_prev[k]) * f * (1.0 - f)
            dz_out[2 * hidden + k] = (dc * i) * (1.0 - g * g)
            dz_out[3 * hidden + k] = (dh[k] * tc) * o * (1.0 - o)
            dc_prev_out[k] = dc * f


def adagrad_update(double[::1] param, double[::1] grad, double[::1] accum,
                   double lr, double eps):
    cdef Py_ssize_t n = param.shape[0]
    cdef Py_ssize_t k
    cdef double g
    with nogil:
        for k in range(n):
            g = grad[k]
            accum[k] += g * g
            param[k] -= lr * g / (sqrt(accum[k]) + eps)
