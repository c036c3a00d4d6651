"""Shared parameter-store machinery for the numpy models."""

import hashlib

import numpy as np

from . import checkpoint, optim


def seeded_rng(seed):
    return np.random.default_rng(seed)


class ParamModel:
    """A model as three parallel dicts: parameters, gradients, Adagrad accumulators.

    Subclasses register parameters in __init__ via _add_param and implement
    their own forward/backward logic. Gradients accumulate across calls until
    zero_grads(); apply_gradients() performs one clipped Adagrad step.
    """

    kind = "model"

    def __init__(self):
        self.params = {}
        self.grads = {}
        self.accum = {}
        self.trained = False

    def _add_param(self, name, shape, rng, scale=0.1):
        self.params[name] = rng.uniform(-scale, scale, size=shape)
        self.grads[name] = np.zeros(shape)
        self.accum[name] = np.zeros(shape)

    def zero_grads(self):
        for g in self.grads.values():
            g.fill(0.0)

    def grad_norm(self):
        return optim.global_norm(self.grads)

    def apply_gradients(self, lr, clip_norm=None):
        """Clip the accumulated gradients to clip_norm, take one Adagrad step, reset."""
        if clip_norm is not None:
            optim.clip_global_norm(self.grads, clip_norm)
        optim.adagrad_step(self.params, self.grads, self.accum, lr)
        self.zero_grads()

    # -- flat views used by the finite-difference checks ---------------------

    def param_names(self):
        return sorted(self.params)

    def param_vector(self):
        return np.concatenate([self.params[k].ravel() for k in self.param_names()])

    def grad_vector(self):
        return np.concatenate([self.grads[k].ravel() for k in self.param_names()])

    def set_param_vector(self, vec):
        offset = 0
        for k in self.param_names():
            p = self.params[k]
            p[...] = vec[offset : offset + p.size].reshape(p.shape)
            offset += p.size

    # -- persistence ----------------------------------------------------------

    def _meta(self):
        return {}

    def save(self, path, vocab_hash="", seed=None):
        meta = {"kind": self.kind, "trained": self.trained, "vocab_hash": vocab_hash, "seed": seed}
        meta.update(self._meta())
        checkpoint.save_checkpoint(path, self.params, self.accum, meta)

    def _restore(self, params, accum, meta):
        for k in self.params:
            self.params[k][...] = params[k]
            self.accum[k][...] = accum[k]
        self.trained = bool(meta.get("trained", False))


def snapshot_params(model):
    return {k: v.copy() for k, v in model.params.items()}


def params_equal(a, b):
    return all(np.array_equal(a[k], b[k]) for k in a)


def vocab_fingerprint(tokens):
    """Stable short hash identifying a vocabulary's exact token ordering."""
    digest = hashlib.sha256("\n".join(tokens).encode("utf-8")).hexdigest()
    return digest[:16]
