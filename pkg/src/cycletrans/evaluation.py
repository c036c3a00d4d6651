"""Automatic evaluation: transfer accuracy, corpus BLEU, and their geometric mean.

Transfer accuracy comes from an independently trained convolutional sentiment
classifier (embedding, parallel conv filters of widths 3/4/5, max-over-time
pooling) so the generator is never judged by the same model that shaped its
rewards. Corpus BLEU here is the standard unsmoothed definition; the smoothed
sentence scorer used for rewards lives in cycletrans.rewards.
"""

import json
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .classifier import LABEL_INDEX
from .corpus import PAD_ID, SENTIMENTS
from .errors import TrainingError
from .nn import layers
from .nn.base import ParamModel, seeded_rng
from .rewards import sentence_bleu

FILTER_WIDTHS = (3, 4, 5)
FILTERS_PER_WIDTH = 100


class TextCNN(ParamModel):
    kind = "eval_classifier"

    def __init__(self, vocab_size, embedding_size, filters=FILTERS_PER_WIDTH, seed=0):
        super().__init__()
        self.vocab_size = vocab_size
        self.embedding_size = embedding_size
        self.filters = filters
        rng = seeded_rng(seed)
        self._add_param("emb", (vocab_size, embedding_size), rng)
        for w in FILTER_WIDTHS:
            self._add_param(f"conv{w}_w", (w * embedding_size, filters), rng)
            self._add_param(f"conv{w}_b", (filters,), rng)
        self._add_param("w_out", (2, len(FILTER_WIDTHS) * filters), rng)
        self._add_param("b_out", (2,), rng)

    def _meta(self):
        return {
            "vocab_size": self.vocab_size,
            "embedding_size": self.embedding_size,
            "filters": self.filters,
        }

    @classmethod
    def load(cls, path):
        from .nn.checkpoint import load_checkpoint

        params, accum, meta = load_checkpoint(path)
        model = cls(meta["vocab_size"], meta["embedding_size"], meta["filters"])
        model._restore(params, accum, meta)
        return model

    def _forward(self, token_ids):
        if len(token_ids) == 0:
            raise ValueError("classifier input must be non-empty")
        ids = list(token_ids)
        if len(ids) < max(FILTER_WIDTHS):
            ids = ids + [PAD_ID] * (max(FILTER_WIDTHS) - len(ids))
        ids = np.asarray(ids, dtype=np.intp)
        xs = layers.embed(self.params["emb"], ids)
        feats = []
        caches = []
        for w in FILTER_WIDTHS:
            positions = len(ids) - w + 1
            windows = np.concatenate([xs[i : positions + i] for i in range(w)], axis=1)
            conv = windows @ self.params[f"conv{w}_w"] + self.params[f"conv{w}_b"]
            relu = np.maximum(conv, 0.0)
            arg = relu.argmax(axis=0)
            feats.append(relu[arg, np.arange(self.filters)])
            caches.append((windows, relu, arg, positions))
        feat = np.concatenate(feats)
        logits = self.params["w_out"] @ feat + self.params["b_out"]
        probs = layers.softmax(logits)
        return probs, (ids, xs, caches, feat)

    def predict(self, token_ids):
        probs, _ = self._forward(token_ids)
        return SENTIMENTS[int(np.argmax(probs))]

    def predict_proba(self, token_ids):
        probs, _ = self._forward(token_ids)
        return probs

    def loss_only(self, token_ids, label_index):
        probs, _ = self._forward(token_ids)
        return -float(np.log(probs[label_index]))

    def loss_and_grad(self, token_ids, label_index, grad_scale=1.0):
        probs, (ids, xs, caches, feat) = self._forward(token_ids)
        loss = -float(np.log(probs[label_index]))
        g = self.grads

        dlogits = probs.copy()
        dlogits[label_index] -= 1.0
        dlogits *= grad_scale
        g["w_out"] += np.outer(dlogits, feat)
        g["b_out"] += dlogits
        dfeat = self.params["w_out"].T @ dlogits

        dxs = np.zeros_like(xs)
        for slot, w in enumerate(FILTER_WIDTHS):
            windows, relu, arg, positions = caches[slot]
            dpool = dfeat[slot * self.filters : (slot + 1) * self.filters]
            dconv = np.zeros((positions, self.filters))
            cols = np.arange(self.filters)
            active = relu[arg, cols] > 0.0
            dconv[arg[active], cols[active]] = dpool[active]
            g[f"conv{w}_w"] += windows.T @ dconv
            g[f"conv{w}_b"] += dconv.sum(axis=0)
            dwindows = dconv @ self.params[f"conv{w}_w"].T
            for i in range(w):
                dxs[i : positions + i] += dwindows[:, i * self.embedding_size : (i + 1) * self.embedding_size]
        layers.embed_backward(g["emb"], ids, dxs)
        return loss


def train_eval_classifier(examples, vocab_size, embedding_size=32, epochs=4, lr=0.3,
                          batch_size=64, clip_norm=2.0, seed=0, filters=FILTERS_PER_WIDTH):
    """Train the independent sentiment judge used for transfer accuracy."""
    model = TextCNN(vocab_size, embedding_size, filters=filters, seed=seed)
    rng = seeded_rng(seed + 1)
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
        if not np.isfinite(total):
            raise TrainingError(f"eval classifier loss became non-finite in epoch {epoch}")
    model.trained = True
    return model


def classifier_accuracy(model, examples):
    hits = sum(1 for ex in examples if model.predict(ex.token_ids) == ex.sentiment)
    return hits / len(examples)


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def _ngram_counts(tokens, order):
    return Counter(tuple(tokens[i : i + order]) for i in range(len(tokens) - order + 1))


def corpus_bleu(candidates, references, max_order=4):
    """Standard unsmoothed corpus BLEU in [0, 1] with brevity penalty."""
    if len(candidates) != len(references):
        raise ValueError("candidate/reference lists differ in length")
    matches = [0] * max_order
    totals = [0] * max_order
    cand_len = 0
    ref_len = 0
    for cand, ref in zip(candidates, references):
        cand = list(cand)
        ref = list(ref)
        cand_len += len(cand)
        ref_len += len(ref)
        for order in range(1, max_order + 1):
            cand_counts = _ngram_counts(cand, order)
            ref_counts = _ngram_counts(ref, order)
            matches[order - 1] += sum(min(c, ref_counts[g]) for g, c in cand_counts.items())
            totals[order - 1] += max(len(cand) - order + 1, 0)
    if cand_len == 0 or any(m == 0 for m in matches):
        return 0.0
    log_prec = sum(math.log(m / t) for m, t in zip(matches, totals))
    brevity = 1.0 if cand_len > ref_len else math.exp(1.0 - ref_len / cand_len)
    return brevity * math.exp(log_prec / max_order)


def content_bleu(generated, sources):
    """Corpus BLEU of the generated sentences against their sources, in percent."""
    return 100.0 * corpus_bleu(generated, sources)


def sentence_average_bleu(generated, sources):
    scores = [sentence_bleu(c, r) if len(list(c)) else 0.0 for c, r in zip(generated, sources)]
    return 100.0 * float(np.mean(scores)) if scores else 0.0


def transfer_accuracy(generated, target_sentiments, model):
    """Percentage of generations the independent classifier assigns the target sentiment."""
    if len(generated) != len(target_sentiments):
        raise ValueError("generated/target lists differ in length")
    hits = 0
    for tokens, target in zip(generated, target_sentiments):
        # an empty generation carries no sentiment and cannot match
        if len(list(tokens)) and model.predict(tokens) == target:
            hits += 1
    return 100.0 * hits / len(generated)


def g_score(acc, bleu):
    """Geometric mean of the accuracy and BLEU percentages."""
    if acc < 0 or bleu < 0:
        raise ValueError("g_score arguments must be non-negative")
    return math.sqrt(acc * bleu)


@dataclass
class EvalReport:
    acc: float
    bleu: float
    g: float
    bleu_sentence_avg: float
    rows: list = field(default_factory=list)

    def to_json(self, path=None):
        obj = {
            "acc": self.acc,
            "bleu": self.bleu,
            "g_score": self.g,
            "bleu_sentence_avg": self.bleu_sentence_avg,
            "rows": self.rows,
        }
        text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text

    def table(self):
        header = f"{'':10s}{'ACC':>8s}{'BLEU':>8s}{'G-score':>9s}"
        row = f"{'result':10s}{self.acc:8.2f}{self.bleu:8.2f}{self.g:9.2f}"
        return header + "\n" + row


def evaluate_transfers(sources, generated, targets, model):
    """Score generated token sequences against sources and target sentiments."""
    if not (len(sources) == len(generated) == len(targets)):
        raise ValueError("sources, generated, and targets must be parallel lists")
    acc = transfer_accuracy(generated, targets, model)
    bleu = content_bleu(generated, sources)
    rows = []
    for src, gen, target in zip(sources, generated, targets):
        predicted = model.predict(gen) if len(list(gen)) else None
        rows.append(
            {
                "source": " ".join(map(str, src)),
                "generated": " ".join(map(str, gen)),
                "target": target,
                "predicted": predicted,
                "sentence_bleu": sentence_bleu(gen, src) if len(list(gen)) else 0.0,
            }
        )
    return EvalReport(
        acc=acc,
        bleu=bleu,
        g=g_score(acc, bleu),
        bleu_sentence_avg=sentence_average_bleu(generated, sources),
        rows=rows,
    )
