"""The cycled training loop and its full schedule.

Each cycle step samples a keep/remove mask for a sentence, reconstructs the
sentence with its own sentiment (maximum-likelihood update for the generator),
generates the opposite-sentiment transfer, scores both outputs with the
harmonic BLEU/confidence reward, and feeds the combined, baseline-centered
reward back to the tagger through the score-function (REINFORCE) estimator.
"""

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import rewards
from .classifier import SelfAttentionClassifier, train_classifier
from .corpus import opposite
from .emotionalizer import Emotionalizer, pretrain_emotionalizer
from .errors import TrainingError
from .neutralizer import Neutralizer, pretrain_neutralizer
from .rewards import RewardRecord


@dataclass
class TrainConfig:
    """Hyperparameters; the defaults are the published training settings."""

    iterations: int = 500
    batch_size: int = 64
    learning_rate: float = 0.6
    hidden_size: int = 256
    embedding_size: int = 128
    vocab_cap: int = 50000
    clip_norm: float = 2.0
    beta: float = 0.5
    classifier_epochs: int = 10
    neutralizer_epochs: int = 1
    emotionalizer_epochs: int = 4
    baseline_decay: float = 0.95
    use_baseline: bool = True
    max_len: int = 20
    seed: int = 0
    checkpoint_every: int = 0

    def __post_init__(self):
        for name in (
            "iterations",
            "batch_size",
            "learning_rate",
            "hidden_size",
            "embedding_size",
            "vocab_cap",
            "clip_norm",
            "beta",
            "baseline_decay",
            "max_len",
        ):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def to_json(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_dict(cls, obj):
        return cls(**obj)


class MovingAverageBaseline:
    """Exponential moving average of observed combined rewards.

    Initializes to the first observed value, so the first advantage is zero.
    """

    def __init__(self, decay=0.95):
        self.decay = decay
        self.value = 0.0
        self.initialized = False

    def center(self, reward):
        return reward - (self.value if self.initialized else reward)

    def update(self, reward):
        if self.initialized:
            self.value = self.decay * self.value + (1.0 - self.decay) * reward
        else:
            self.value = reward
            self.initialized = True
        return self.value


def policy_gradient(logprob_grads, reward, baseline):
    """Score-function estimator: (reward - baseline) * grad(log P(mask))."""
    scale = reward - baseline
    return {name: scale * g for name, g in logprob_grads.items()}


@dataclass
class ModelTriplet:
    classifier: SelfAttentionClassifier
    neutralizer: Neutralizer
    emotionalizer: Emotionalizer


def _cycle_example(models, example, config, rng, baseline, grad_scale):
    """Forward/reward/backward for one sentence; grads accumulate unapplied."""
    ids = example.token_ids
    sentiment = example.sentiment
    neutralized = models.neutralizer.sample_mask(ids, rng)
    kept = neutralized.kept_tokens

    reconstruction = models.emotionalizer.generate(kept, sentiment, config.max_len)
    recon_loss = models.emotionalizer.loss_and_grad(ids, kept, sentiment, grad_scale=grad_scale)
    bleu1, confid1, r1 = rewards.score_generation(
        reconstruction.tokens, ids, sentiment, models.classifier, config.beta
    )

    flipped = opposite(sentiment)
    transfer = models.emotionalizer.generate(kept, flipped, config.max_len)
    bleu2, confid2, r2 = rewards.score_generation(
        transfer.tokens, ids, flipped, models.classifier, config.beta
    )

    rc = rewards.combined_reward(r1, r2)
    if not (np.isfinite(rc) and np.isfinite(recon_loss)):
        raise TrainingError(f"non-finite loss/reward on sample {example.raw_text!r}")
    if config.use_baseline:
        baseline_used = baseline.value if baseline.initialized else rc
    else:
        baseline_used = 0.0
    advantage = rc - baseline_used
    models.neutralizer.loss_and_grad(ids, neutralized.mask, grad_scale=advantage * grad_scale)
    if config.use_baseline:
        baseline.update(rc)
    return RewardRecord(
        bleu1=bleu1, confid1=confid1, r1=r1,
        bleu2=bleu2, confid2=confid2, r2=r2,
        rc=rc, baseline=baseline_used,
    )


def cycle_step(models, example, config, rng, baseline=None):
    """One full literal cycle iteration on a single sentence, updates applied."""
    if baseline is None:
        baseline = MovingAverageBaseline(config.baseline_decay)
    models.neutralizer.zero_grads()
    models.emotionalizer.zero_grads()
    record = _cycle_example(models, example, config, rng, baseline, grad_scale=1.0)
    models.emotionalizer.apply_gradients(config.learning_rate, config.clip_norm)
    models.neutralizer.apply_gradients(config.learning_rate, config.clip_norm)
    return record


@dataclass
class TrainResult:
    models: ModelTriplet
    config: TrainConfig
    classifier_losses: list = field(default_factory=list)
    neutralizer_losses: list = field(default_factory=list)
    emotionalizer_losses: list = field(default_factory=list)
    reward_log: list = field(default_factory=list)
    out_dir: str = None


def _log_line(iteration, records, baseline_value):
    return json.dumps(
        {
            "iteration": iteration,
            "r1": float(np.mean([r.r1 for r in records])),
            "r2": float(np.mean([r.r2 for r in records])),
            "rc": float(np.mean([r.rc for r in records])),
            "baseline": baseline_value,
        },
        sort_keys=True,
    )


def _save_models(models, out_dir, vocab_hash, seed):
    out = Path(out_dir)
    models.classifier.save(out / "classifier.npz", vocab_hash, seed)
    models.neutralizer.save(out / "neutralizer.npz", vocab_hash, seed)
    models.emotionalizer.save(out / "emotionalizer.npz", vocab_hash, seed)


def train(splits, vocab, config, out_dir=None, log=print):
    """Full schedule: pre-train all three models, then run the cycled iterations.

    Deterministic for a fixed config: every phase draws from its own child of
    the config seed. Writes checkpoints, the config snapshot, and the
    line-delimited reward log when out_dir is given.
    """
    seeds = np.random.SeedSequence(config.seed).spawn(8)
    vocab_hash = vocab.fingerprint()
    models = ModelTriplet(
        classifier=SelfAttentionClassifier(
            len(vocab), config.embedding_size, config.hidden_size, seed=seeds[0]
        ),
        neutralizer=Neutralizer(len(vocab), config.embedding_size, config.hidden_size, seed=seeds[1]),
        emotionalizer=Emotionalizer(len(vocab), config.embedding_size, config.hidden_size, seed=seeds[2]),
    )
    out = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        config.to_json(out / "config.json")

    log(f"pre-training classifier ({config.classifier_epochs} epochs)")
    cls_losses = train_classifier(
        models.classifier, splits.train, config.classifier_epochs, config.learning_rate,
        config.batch_size, config.clip_norm, seed=seeds[3],
    )
    log(f"pre-training neutralizer ({config.neutralizer_epochs} epochs)")
    neut_losses = pretrain_neutralizer(
        models.neutralizer, models.classifier, splits.train, config.neutralizer_epochs,
        config.learning_rate, config.batch_size, config.clip_norm, seed=seeds[4],
    )
    log(f"pre-training emotionalizer ({config.emotionalizer_epochs} epochs)")
    emo_losses = pretrain_emotionalizer(
        models.emotionalizer, models.classifier, splits.train, config.emotionalizer_epochs,
        config.learning_rate, config.batch_size, config.clip_norm, seed=seeds[5],
    )

    result = TrainResult(
        models=models,
        config=config,
        classifier_losses=cls_losses,
        neutralizer_losses=neut_losses,
        emotionalizer_losses=emo_losses,
        out_dir=str(out) if out else None,
    )

    order_rng = np.random.default_rng(seeds[6])
    mask_rng = np.random.default_rng(seeds[7])
    baseline = MovingAverageBaseline(config.baseline_decay)
    n = len(splits.train)
    order = order_rng.permutation(n)
    cursor = 0
    log_fh = open(out / "rewards.jsonl", "w", encoding="utf-8") if out else None
    try:
        for iteration in range(config.iterations):
            if cursor + config.batch_size > n:
                order = order_rng.permutation(n)
                cursor = 0
            batch = order[cursor : cursor + config.batch_size]
            cursor += config.batch_size
            models.neutralizer.zero_grads()
            models.emotionalizer.zero_grads()
            records = [
                _cycle_example(
                    models, splits.train[i], config, mask_rng, baseline,
                    grad_scale=1.0 / len(batch),
                )
                for i in batch
            ]
            models.emotionalizer.apply_gradients(config.learning_rate, config.clip_norm)
            models.neutralizer.apply_gradients(config.learning_rate, config.clip_norm)
            result.reward_log.append(_log_line(iteration, records, baseline.value))
            if log_fh:
                log_fh.write(result.reward_log[-1] + "\n")
            if out and config.checkpoint_every and (iteration + 1) % config.checkpoint_every == 0:
                _save_models(models, out, vocab_hash, config.seed)
            if iteration % 50 == 0:
                mean_rc = float(np.mean([r.rc for r in records]))
                log(f"iteration {iteration}: mean Rc {mean_rc:.3f} baseline {baseline.value:.3f}")
    finally:
        if log_fh:
            log_fh.close()
    if out:
        _save_models(models, out, vocab_hash, config.seed)
    return result


def translate_tokens(models, token_ids, target_sentiment, max_len=20):
    """Neutralize with the greedy mask, then decode toward the target sentiment."""
    neutralized = models.neutralizer.greedy_mask(token_ids)
    generated = models.emotionalizer.generate(neutralized.kept_tokens, target_sentiment, max_len)
    return generated.tokens
