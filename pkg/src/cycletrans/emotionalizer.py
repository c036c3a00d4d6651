"""Sentiment re-attachment: one content encoder, two sentiment-specific decoders.

The encoder compresses the kept (neutral) words into a dense vector; the
decoder selected by the target sentiment regenerates a full sentence from it.
Pre-training teaches each decoder to reconstruct original sentences of its own
polarity from their neutralized form; the same reconstruction gradient is the
update used inside cycled training.
"""

from dataclasses import dataclass

import numpy as np

from .classifier import EPOCH_LOSS_SLACK, discretize
from .corpus import BOS_ID, EOS_ID, PAD_ID, SENTIMENTS
from .errors import TrainingError
from .neutralizer import apply_mask
from .nn import layers
from .nn.base import ParamModel, seeded_rng

MAX_DECODE_LEN = 20


@dataclass
class GeneratedSentence:
    tokens: list
    step_log_probs: list
    target_sentiment: str


class Emotionalizer(ParamModel):
    kind = "emotionalizer"

    def __init__(self, vocab_size, embedding_size, hidden_size, seed=0):
        super().__init__()
        self.vocab_size = vocab_size
        self.embedding_size = embedding_size
        self.hidden_size = hidden_size
        rng = seeded_rng(seed)
        self._add_param("enc_emb", (vocab_size, embedding_size), rng)
        self._add_param("enc_wx", (embedding_size, 4 * hidden_size), rng)
        self._add_param("enc_wh", (hidden_size, 4 * hidden_size), rng)
        self._add_param("enc_b", (4 * hidden_size,), rng)
        for s in SENTIMENTS:
            self._add_param(f"dec_{s}_emb", (vocab_size, embedding_size), rng)
            self._add_param(f"dec_{s}_wx", (embedding_size, 4 * hidden_size), rng)
            self._add_param(f"dec_{s}_wh", (hidden_size, 4 * hidden_size), rng)
            self._add_param(f"dec_{s}_b", (4 * hidden_size,), rng)
            self._add_param(f"dec_{s}_w_out", (vocab_size, hidden_size), rng)
            self._add_param(f"dec_{s}_b_out", (vocab_size,), rng)

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

    def decoder_params(self, sentiment):
        p = self.params
        return {k: p[f"dec_{sentiment}_{k}"] for k in ("emb", "wx", "wh", "b", "w_out", "b_out")}

    # -- encoder -----------------------------------------------------------

    def _encode(self, kept_ids):
        if len(kept_ids) == 0:
            raise ValueError("encoder input must be non-empty")
        ids = np.asarray(kept_ids, dtype=np.intp)
        p = self.params
        xs = layers.embed(p["enc_emb"], ids)
        hs, cache = layers.lstm_forward(xs, p["enc_wx"], p["enc_wh"], p["enc_b"])
        return hs[-1], (ids, hs, cache)

    def encode_content(self, kept_ids):
        """Dense content vector: the encoder's final hidden state."""
        content, _ = self._encode(kept_ids)
        return content

    def _encoder_backward(self, enc_cache, dcontent):
        ids, hs, cache = enc_cache
        p, g = self.params, self.grads
        dhs = np.zeros_like(hs)
        dhs[-1] = dcontent
        dxs, _, _ = layers.lstm_backward(
            dhs, cache, p["enc_wx"], p["enc_wh"], g["enc_wx"], g["enc_wh"], g["enc_b"]
        )
        layers.embed_backward(g["enc_emb"], ids, dxs)

    # -- decoding ----------------------------------------------------------

    def decode(self, content, sentiment, max_len=MAX_DECODE_LEN):
        """Greedy decode from a content vector with the decoder chosen by sentiment."""
        dec = self.decoder_params(sentiment)
        h = content
        c = np.zeros(self.hidden_size)
        acts = np.empty(4 * self.hidden_size)
        prev = BOS_ID
        tokens = []
        log_probs = []
        for _ in range(max_len):
            x = dec["emb"][prev]
            z = x @ dec["wx"] + h @ dec["wh"] + dec["b"]
            h = np.empty(self.hidden_size)
            c_new = np.empty(self.hidden_size)
            layers.kernels.lstm_gates_forward(z, c, acts, h, c_new)
            c = c_new
            logits = dec["w_out"] @ h + dec["b_out"]
            # never emit padding or the start marker
            logits[PAD_ID] = -np.inf
            logits[BOS_ID] = -np.inf
            log_dist = layers.log_softmax(logits)
            nxt = int(np.argmax(log_dist))
            if nxt == EOS_ID:
                break
            tokens.append(nxt)
            log_probs.append(float(log_dist[nxt]))
            prev = nxt
        return GeneratedSentence(tokens=tokens, step_log_probs=log_probs, target_sentiment=sentiment)

    def generate(self, kept_ids, sentiment, max_len=MAX_DECODE_LEN):
        content, _ = self._encode(kept_ids)
        return self.decode(content, sentiment, max_len)

    # -- reconstruction likelihood ------------------------------------------

    def _teacher_forced(self, target_ids, kept_ids, sentiment):
        content, enc_cache = self._encode(kept_ids)
        dec = self.decoder_params(sentiment)
        inputs = np.asarray([BOS_ID] + list(target_ids), dtype=np.intp)
        targets = np.asarray(list(target_ids) + [EOS_ID], dtype=np.intp)
        xs = layers.embed(dec["emb"], inputs)
        hs, cache = layers.lstm_forward(xs, dec["wx"], dec["wh"], dec["b"], h0=content)
        logits = hs @ dec["w_out"].T + dec["b_out"]
        log_probs = layers.log_softmax_rows(logits)
        return content, enc_cache, inputs, targets, hs, cache, log_probs

    def reconstruction_logprob(self, target_ids, kept_ids, sentiment):
        """Teacher-forced log-likelihood of the target sentence (end marker included)."""
        _, _, _, targets, _, _, log_probs = self._teacher_forced(target_ids, kept_ids, sentiment)
        rows = np.arange(len(targets))
        return float(log_probs[rows, targets].sum())

    def loss_only(self, target_ids, kept_ids, sentiment):
        return -self.reconstruction_logprob(target_ids, kept_ids, sentiment)

    def loss_and_grad(self, target_ids, kept_ids, sentiment, grad_scale=1.0):
        """Negative reconstruction log-likelihood; accumulates scaled gradients."""
        content, enc_cache, inputs, targets, hs, cache, log_probs = self._teacher_forced(
            target_ids, kept_ids, sentiment
        )
        rows = np.arange(len(targets))
        loss = -float(log_probs[rows, targets].sum())
        g = self.grads
        dec = self.decoder_params(sentiment)

        dlogits = np.exp(log_probs)
        dlogits[rows, targets] -= 1.0
        dlogits *= grad_scale
        g[f"dec_{sentiment}_w_out"] += dlogits.T @ hs
        g[f"dec_{sentiment}_b_out"] += dlogits.sum(axis=0)
        dhs = dlogits @ dec["w_out"]

        dxs, dh0, _ = layers.lstm_backward(
            dhs,
            cache,
            dec["wx"],
            dec["wh"],
            g[f"dec_{sentiment}_wx"],
            g[f"dec_{sentiment}_wh"],
            g[f"dec_{sentiment}_b"],
        )
        layers.embed_backward(g[f"dec_{sentiment}_emb"], inputs, dxs)
        self._encoder_backward(enc_cache, dh0)
        return loss

    def cycle_update(self, target_ids, kept_ids, sentiment, lr, clip_norm=2.0):
        """One clipped Adagrad step on the reconstruction loss for this example."""
        self.zero_grads()
        loss = self.loss_and_grad(target_ids, kept_ids, sentiment)
        if not np.isfinite(loss):
            raise TrainingError(f"non-finite reconstruction loss on {list(target_ids)!r}")
        self.apply_gradients(lr, clip_norm)
        return loss


def neutralized_inputs(classifier, examples):
    """Kept-token sequences after removing the words the classifier marks emotional."""
    kept = []
    for ex in examples:
        mask = discretize(classifier.attention_weights(ex.token_ids))
        kept.append(apply_mask(ex.token_ids, mask))
    return kept


def pretrain_emotionalizer(model, classifier, examples, epochs, lr, batch_size=64, clip_norm=2.0, seed=0):
    """Reconstruction pre-training routed through the example's own decoder."""
    if not classifier.trained:
        raise RuntimeError("emotionalizer pre-training requires a trained classifier")
    rng = seeded_rng(seed)
    kept = neutralized_inputs(classifier, examples)
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
                    ex.token_ids, kept[idx], ex.sentiment, grad_scale=1.0 / len(batch)
                )
            model.apply_gradients(lr, clip_norm)
        epoch_loss = total / n
        if not np.isfinite(epoch_loss):
            raise TrainingError(f"emotionalizer loss became non-finite in epoch {epoch}")
        if history and epoch_loss > history[-1] * EPOCH_LOSS_SLACK:
            raise TrainingError(
                f"emotionalizer loss rose from {history[-1]:.4f} to {epoch_loss:.4f} in epoch {epoch}"
            )
        history.append(epoch_loss)
    if epochs > 0:
        model.trained = True
    return history


def reconstruction_exact_match(model, classifier, examples):
    """Fraction of examples greedily reconstructed token-for-token."""
    kept = neutralized_inputs(classifier, examples)
    hits = 0
    for ex, kept_ids in zip(examples, kept):
        out = model.generate(kept_ids, ex.sentiment)
        if out.tokens == list(ex.token_ids):
            hits += 1
    return hits / len(examples)
