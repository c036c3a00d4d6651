"""Word-level neutral/emotional tagger.

A single LSTM emits an independent keep/remove probability per word. It is
pre-trained to imitate the classifier's discretized attention masks and later
tuned by policy gradient, where masks are sampled per word from the tagged
Bernoulli probabilities.
"""

from dataclasses import dataclass

import numpy as np

from .classifier import EPOCH_LOSS_SLACK, discretize
from .errors import TrainingError
from .nn import layers
from .nn.base import ParamModel, seeded_rng

KEEP = 1  # class 1 = neutral word, kept by the mask
REMOVE = 0

# Bernoulli sampling may draw the empty mask; resample this many times before
# force-keeping the single most-neutral position.
MAX_EMPTY_RESAMPLES = 3


@dataclass
class NeutralizedSequence:
    mask: np.ndarray
    kept_tokens: list
    log_prob: float


def apply_mask(tokens, mask):
    """Order-preserving subsequence of tokens where mask is 1."""
    if len(tokens) != len(mask):
        raise ValueError(f"mask length {len(mask)} != token length {len(tokens)}")
    return [t for t, m in zip(tokens, mask) if m]


def mask_log_prob(keep_probs, mask, log_keep=None, log_remove=None):
    """Sum of per-position Bernoulli log-masses of `mask` under keep_probs."""
    if log_keep is None:
        log_keep = np.log(keep_probs)
        log_remove = np.log1p(-np.asarray(keep_probs))
    mask = np.asarray(mask)
    return float(np.where(mask == KEEP, log_keep, log_remove).sum())


class Neutralizer(ParamModel):
    kind = "neutralizer"

    def __init__(self, vocab_size, embedding_size, hidden_size, seed=0):
        super().__init__()
        self.vocab_size = vocab_size
        self.embedding_size = embedding_size
        self.hidden_size = hidden_size
        rng = seeded_rng(seed)
        self._add_param("emb", (vocab_size, embedding_size), rng)
        self._add_param("wx", (embedding_size, 4 * hidden_size), rng)
        self._add_param("wh", (hidden_size, 4 * hidden_size), rng)
        self._add_param("b", (4 * hidden_size,), rng)
        self._add_param("w_tag", (2, hidden_size), rng)
        self._add_param("b_tag", (2,), rng)

    def _meta(self):
        return {
            "vocab_size": self.vocab_size,
            "embedding_size": self.embedding_size,
            "hidden_size": self.hidden_size,
        }

    @classmethod
    def load(cls, path):
        from .nn.checkpoint import load_checkpoint

        params, accum, meta = load_checkpoint(path)
        model = cls(meta["vocab_size"], meta["embedding_size"], meta["hidden_size"])
        model._restore(params, accum, meta)
        return model

    def _forward(self, token_ids):
        if len(token_ids) == 0:
            raise ValueError("tagger input must be non-empty")
        ids = np.asarray(token_ids, dtype=np.intp)
        p = self.params
        xs = layers.embed(p["emb"], ids)
        hs, cache = layers.lstm_forward(xs, p["wx"], p["wh"], p["b"])
        logits = hs @ p["w_tag"].T + p["b_tag"]
        log_probs = layers.log_softmax_rows(logits)
        return log_probs, (ids, hs, cache, log_probs)

    def tag_probabilities(self, token_ids):
        """Per-word probability of being neutral (class KEEP)."""
        log_probs, _ = self._forward(token_ids)
        return np.exp(log_probs[:, KEEP])

    def tag_log_probs(self, token_ids):
        log_probs, _ = self._forward(token_ids)
        return log_probs

    def greedy_mask(self, token_ids):
        """Deterministic decode: keep every word with keep-probability >= 0.5."""
        log_probs, _ = self._forward(token_ids)
        probs = np.exp(log_probs[:, KEEP])
        mask = (probs >= 0.5).astype(np.int64)
        if mask.sum() == 0:
            mask[int(np.argmax(probs))] = KEEP
        return self._finish_mask(token_ids, mask, log_probs)

    def sample_mask(self, token_ids, rng):
        """Draw an independent Bernoulli mask from the tagged probabilities."""
        log_probs, _ = self._forward(token_ids)
        probs = np.exp(log_probs[:, KEEP])
        mask = (rng.random(len(probs)) < probs).astype(np.int64)
        for _ in range(MAX_EMPTY_RESAMPLES):
            if mask.sum() > 0:
                break
            mask = (rng.random(len(probs)) < probs).astype(np.int64)
        if mask.sum() == 0:
            mask[int(np.argmax(probs))] = KEEP
        return self._finish_mask(token_ids, mask, log_probs)

    def _finish_mask(self, token_ids, mask, log_probs):
        log_prob = mask_log_prob(
            None, mask, log_keep=log_probs[:, KEEP], log_remove=log_probs[:, REMOVE]
        )
        return NeutralizedSequence(
            mask=mask, kept_tokens=apply_mask(list(token_ids), mask), log_prob=log_prob
        )

    # -- loss / gradients --------------------------------------------------

    def loss_only(self, token_ids, targets):
        log_probs, _ = self._forward(token_ids)
        return -float(log_probs[np.arange(len(targets)), np.asarray(targets)].sum())

    def loss_and_grad(self, token_ids, targets, grad_scale=1.0):
        """Per-word cross-entropy against a binary mask; accumulates scaled grads.

        With grad_scale = -(reward - baseline) this is exactly the policy-
        gradient contribution for a sampled mask, since the loss is
        -log P(mask | sentence).
        """
        targets = np.asarray(targets)
        log_probs, (ids, hs, cache, _) = self._forward(token_ids)
        steps = len(targets)
        rows = np.arange(steps)
        loss = -float(log_probs[rows, targets].sum())
        p, g = self.params, self.grads

        dlogits = np.exp(log_probs)
        dlogits[rows, targets] -= 1.0
        dlogits *= grad_scale
        g["w_tag"] += dlogits.T @ hs
        g["b_tag"] += dlogits.sum(axis=0)
        dhs = dlogits @ p["w_tag"]

        dxs, _, _ = layers.lstm_backward(dhs, cache, p["wx"], p["wh"], g["wx"], g["wh"], g["b"])
        layers.embed_backward(g["emb"], ids, dxs)
        return loss


def pretrain_neutralizer(model, classifier, examples, epochs, lr, batch_size=64, clip_norm=2.0, seed=0):
    """Imitate the classifier's discretized attention masks; returns epoch losses."""
    if not classifier.trained:
        raise RuntimeError("neutralizer pre-training requires a trained classifier")
    rng = seeded_rng(seed)
    targets = [discretize(classifier.attention_weights(ex.token_ids)) for ex in examples]
    history = []
    n = len(examples)
    for epoch in range(epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            batch = order[start : start + batch_size]
            model.zero_grads()
            for idx in batch:
                total += model.loss_and_grad(
                    examples[idx].token_ids, targets[idx], grad_scale=1.0 / len(batch)
                )
            model.apply_gradients(lr, clip_norm)
        epoch_loss = total / n
        if not np.isfinite(epoch_loss):
            raise TrainingError(f"neutralizer loss became non-finite in epoch {epoch}")
        if history and epoch_loss > history[-1] * EPOCH_LOSS_SLACK:
            raise TrainingError(
                f"neutralizer loss rose from {history[-1]:.4f} to {epoch_loss:.4f} in epoch {epoch}"
            )
        history.append(epoch_loss)
    if epochs > 0:
        model.trained = True
    return history


def tagging_accuracy(model, classifier, examples):
    """Fraction of word positions where the greedy mask matches the classifier's."""
    agree = 0
    total = 0
    for ex in examples:
        target = discretize(classifier.attention_weights(ex.token_ids))
        mask = model.greedy_mask(ex.token_ids).mask
        agree += int((mask == target).sum())
        total += len(target)
    return agree / total
