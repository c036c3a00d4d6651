"""Sentence-level reward machinery for cycled training.

The per-path reward is the beta-weighted harmonic mean of a smoothed
sentence-level BLEU against the source sentence and the classifier's
confidence in the target sentiment; the two cycle directions simply add.
"""

import math
from collections import Counter
from dataclasses import dataclass

DEFAULT_BETA = 0.5
MAX_ORDER = 4


def _ngram_counts(tokens, order):
    return Counter(tuple(tokens[i : i + order]) for i in range(len(tokens) - order + 1))


def sentence_bleu(candidate, reference, max_order=MAX_ORDER):
    """Smoothed sentence BLEU in [0, 1].

    Geometric mean of modified n-gram precisions up to max_order with add-one
    smoothing on orders >= 2, times the brevity penalty
    exp(min(0, 1 - |ref| / |cand|)). An empty candidate scores 0.
    """
    candidate = list(candidate)
    reference = list(reference)
    if not reference:
        raise ValueError("reference must be non-empty")
    if not candidate:
        return 0.0
    log_prec_sum = 0.0
    for order in range(1, max_order + 1):
        cand_counts = _ngram_counts(candidate, order)
        ref_counts = _ngram_counts(reference, order)
        matches = sum(min(count, ref_counts[gram]) for gram, count in cand_counts.items())
        total = max(len(candidate) - order + 1, 0)
        if order == 1:
            if matches == 0:
                return 0.0
            precision = matches / total
        else:
            precision = (matches + 1.0) / (total + 1.0)
        log_prec_sum += math.log(precision)
    brevity = math.exp(min(0.0, 1.0 - len(reference) / len(candidate)))
    return brevity * math.exp(log_prec_sum / max_order)


def harmonic_reward(bleu, confid, beta=DEFAULT_BETA):
    """Weighted harmonic mean (1+b^2)*bleu*confid / (b^2*bleu + confid); 0 at (0, 0)."""
    denom = beta * beta * bleu + confid
    if denom == 0.0:
        return 0.0
    return (1.0 + beta * beta) * bleu * confid / denom


def combined_reward(r1, r2):
    return r1 + r2


@dataclass
class RewardRecord:
    bleu1: float
    confid1: float
    r1: float
    bleu2: float
    confid2: float
    r2: float
    rc: float
    baseline: float


def score_generation(generated_ids, source_ids, sentiment, classifier, beta=DEFAULT_BETA):
    """(bleu, confidence, reward) of a generated sequence against its source.

    An empty generation carries no content and no recognizable sentiment, so
    both components are 0.
    """
    if not generated_ids:
        return 0.0, 0.0, 0.0
    bleu = sentence_bleu(generated_ids, source_ids)
    confid = classifier.confidence(generated_ids, sentiment)
    return bleu, confid, harmonic_reward(bleu, confid, beta)
