"""Central finite-difference gradient verification."""

import numpy as np


def finite_difference_grad(f, x0, eps=1e-5):
    """Central-difference gradient of scalar f at x0, one coordinate at a time."""
    x = x0.astype(float).copy()
    grad = np.empty_like(x)
    for i in range(x.size):
        orig = x[i]
        x[i] = orig + eps
        hi = f(x)
        x[i] = orig - eps
        lo = f(x)
        x[i] = orig
        grad[i] = (hi - lo) / (2.0 * eps)
    return grad


def max_relative_error(analytic, numeric, floor=1e-5):
    """Worst-case per-coordinate relative disagreement between two gradients.

    Coordinates whose combined magnitude falls below `floor` are measured
    against the floor instead: central differences at perturbation 1e-5 carry
    ~1e-10 roundoff, which would otherwise swamp the ratio for near-zero
    gradients while the absolute agreement is far tighter than needed.
    """
    denom = np.maximum(np.abs(analytic) + np.abs(numeric), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def check_model_gradients(model, loss_with_grad, loss_only, eps=1e-5):
    """Compare a model's analytic gradient against central finite differences.

    loss_with_grad() must populate model.grads for the current parameters;
    loss_only() must evaluate the same scalar without touching gradients.
    Returns (max_relative_error, analytic, numeric).
    """
    x0 = model.param_vector()
    model.zero_grads()
    loss_with_grad()
    analytic = model.grad_vector()

    def f(vec):
        model.set_param_vector(vec)
        return loss_only()

    try:
        numeric = finite_difference_grad(f, x0, eps=eps)
    finally:
        model.set_param_vector(x0)
        model.zero_grads()
    return max_relative_error(analytic, numeric), analytic, numeric
