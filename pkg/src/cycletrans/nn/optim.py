"""Gradient clipping and the Adagrad step used by every model."""

import math

from . import kernels

ADAGRAD_EPS = 1e-8


def global_norm(grads):
    total = 0.0
    for g in grads.values():
        total += float((g * g).sum())
    return math.sqrt(total)


def clip_global_norm(grads, max_norm):
    """Rescale all gradients in place so the global L2 norm is at most max_norm."""
    norm = global_norm(grads)
    if norm > max_norm and norm > 0.0:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm


def adagrad_step(params, grads, accum, lr, eps=ADAGRAD_EPS):
    for name, p in params.items():
        kernels.adagrad_update(p.ravel(), grads[name].ravel(), accum[name].ravel(), lr, eps)
