"""Self-attention sentiment classifier.

An LSTM reads the sentence; per-word scores e_i = h_i' A h_T (with the last
hidden state as context) are softmaxed into attention weights, whose weighted
sum of hidden states feeds a 2-way softmax. Thresholding the weights at their
mean marks each word as neutral (kept) or emotional (removed), which is the
supervision signal for the word tagger and the confidence oracle for rewards.
"""

from dataclasses import dataclass

import numpy as np

from .corpus import SENTIMENTS
from .errors import TrainingError
from .nn import layers
from .nn.base import ParamModel, seeded_rng

LABEL_INDEX = {s: i for i, s in enumerate(SENTIMENTS)}

# Tolerated relative increase of the epoch-averaged loss before a run is
# declared divergent.
EPOCH_LOSS_SLACK = 1.05


@dataclass
class AttentionProfile:
    weights: np.ndarray
    mean: float
    mask: np.ndarray


def discretize(weights):
    """Binary neutral/emotional mask: 1 (kept) iff the weight is <= the mean.

    min <= mean always holds, so the mask is never empty.
    """
    weights = np.asarray(weights, dtype=float)
    return (weights <= weights.mean()).astype(np.int64)


def attention_profile(weights):
    weights = np.asarray(weights, dtype=float)
    return AttentionProfile(weights=weights, mean=float(weights.mean()), mask=discretize(weights))


class SelfAttentionClassifier(ParamModel):
    kind = "classifier"

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
        self._add_param("attn", (hidden_size, hidden_size), rng)
        self._add_param("w_out", (2, hidden_size), rng)
        self._add_param("b_out", (2,), rng)

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

    # -- forward ---------------------------------------------------------

    def _forward(self, token_ids):
        if len(token_ids) == 0:
            raise ValueError("classifier input must be non-empty")
        ids = np.asarray(token_ids, dtype=np.intp)
        p = self.params
        xs = layers.embed(p["emb"], ids)
        hs, cache = layers.lstm_forward(xs, p["wx"], p["wh"], p["b"])
        scores = (hs @ p["attn"]) @ hs[-1]
        alphas = layers.softmax(scores)
        context = hs.T @ alphas
        logits = p["w_out"] @ context + p["b_out"]
        probs = layers.softmax(logits)
        return probs, alphas, (ids, hs, cache, alphas, context, probs)

    def encode(self, token_ids):
        """Hidden state sequence (T, H) for a token-id sequence."""
        if len(token_ids) == 0:
            raise ValueError("classifier input must be non-empty")
        ids = np.asarray(token_ids, dtype=np.intp)
        xs = layers.embed(self.params["emb"], ids)
        hs, _ = layers.lstm_forward(xs, self.params["wx"], self.params["wh"], self.params["b"])
        return hs

    def attention_weights(self, token_ids):
        _, alphas, _ = self._forward(token_ids)
        return alphas

    def classify(self, token_ids):
        probs, alphas, _ = self._forward(token_ids)
        return probs, attention_profile(alphas)

    def confidence(self, token_ids, sentiment):
        """Probability mass the trained classifier puts on `sentiment`."""
        if not self.trained:
            raise RuntimeError("classifier has not been trained")
        probs, _, _ = self._forward(token_ids)
        return float(probs[LABEL_INDEX[sentiment]])

    # -- loss / gradients --------------------------------------------------

    def loss_only(self, token_ids, label_index):
        probs, _, _ = self._forward(token_ids)
        return -float(np.log(probs[label_index]))

    def loss_and_grad(self, token_ids, label_index, grad_scale=1.0):
        """Cross-entropy of one example; accumulates grad_scale * dL into grads."""
        probs, alphas, (ids, hs, cache, _, context, _) = self._forward(token_ids)
        loss = -float(np.log(probs[label_index]))
        p, g = self.params, self.grads

        dlogits = probs.copy()
        dlogits[label_index] -= 1.0
        dlogits *= grad_scale
        g["w_out"] += np.outer(dlogits, context)
        g["b_out"] += dlogits
        dcontext = p["w_out"].T @ dlogits

        # context = hs' alphas
        dalphas = hs @ dcontext
        dhs = np.outer(alphas, dcontext)
        dscores = layers.softmax_vjp(alphas, dalphas)
        # scores_i = h_i' A h_T
        g["attn"] += np.outer(hs.T @ dscores, hs[-1])
        dhs += np.outer(dscores, p["attn"] @ hs[-1])
        dhs[-1] += p["attn"].T @ (hs.T @ dscores)

        dxs, _, _ = layers.lstm_backward(dhs, cache, p["wx"], p["wh"], g["wx"], g["wh"], g["b"])
        layers.embed_backward(g["emb"], ids, dxs)
        return loss


def train_classifier(model, examples, epochs, lr, batch_size=64, clip_norm=2.0, seed=0):
    """Minibatch Adagrad training; returns the per-epoch mean losses.

    Raises TrainingError when the loss goes non-finite or the epoch-averaged
    loss rises by more than the divergence slack.
    """
    rng = seeded_rng(seed)
    history = []
    n = len(examples)
    for epoch in range(epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            batch = order[start : start + batch_size]
            model.zero_grads()
            for idx in batch:
                ex = examples[idx]
                total += model.loss_and_grad(
                    ex.token_ids, LABEL_INDEX[ex.sentiment], grad_scale=1.0 / len(batch)
                )
            model.apply_gradients(lr, clip_norm)
        epoch_loss = total / n
        if not np.isfinite(epoch_loss):
            raise TrainingError(f"classifier loss became non-finite in epoch {epoch}")
        if history and epoch_loss > history[-1] * EPOCH_LOSS_SLACK:
            raise TrainingError(
                f"classifier loss rose from {history[-1]:.4f} to {epoch_loss:.4f} in epoch {epoch}"
            )
        history.append(epoch_loss)
    if epochs > 0:
        model.trained = True
    return history


def accuracy(model, examples):
    correct = 0
    for ex in examples:
        probs, _, _ = model._forward(ex.token_ids)
        if int(np.argmax(probs)) == LABEL_INDEX[ex.sentiment]:
            correct += 1
    return correct / len(examples)
