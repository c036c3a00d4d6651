"""Review ingestion, vocabulary handling, and the synthetic benchmark corpus.

Raw reviews come in as line-delimited JSON ({"text": ..., "rating": 1..5}) or
tab-separated "rating<TAB>text". The pipeline drops neutral ratings, reviews
longer than 20 words, and (optionally) pairs the sentiment classifier scores
below a confidence threshold; what survives is the first sentence of the
review paired with its sentiment label.
"""

import hashlib
import json
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import partial
from multiprocessing import Pool

from .errors import DegenerateInputError

POSITIVE = "positive"
NEGATIVE = "negative"
SENTIMENTS = (NEGATIVE, POSITIVE)

PAD, UNK, BOS, EOS = "<pad>", "<unk>", "<s>", "</s>"
RESERVED = (PAD, UNK, BOS, EOS)
PAD_ID, UNK_ID, BOS_ID, EOS_ID = 0, 1, 2, 3

MAX_WORDS = 20
CONFIDENCE_THRESHOLD = 0.8

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")
_SENTENCE_END = (".", "!", "?")
_EMOTION_SLOT = "{emotion}"
_SLOT_RE = re.compile(r"^\{(\w+)\}$")


def opposite(sentiment):
    return POSITIVE if sentiment == NEGATIVE else NEGATIVE


def tokenize(text):
    """Lowercased word/punctuation tokens; raises DegenerateInputError if none."""
    tokens = _TOKEN_RE.findall(text.lower())
    if not tokens:
        raise DegenerateInputError(f"no tokens in {text!r}")
    return tokens


def label_from_rating(rating):
    """Map a 1-5 star rating to a sentiment; rating 3 is neither class (None)."""
    if rating not in (1, 2, 3, 4, 5):
        raise ValueError(f"rating must be 1..5, got {rating!r}")
    if rating > 3:
        return POSITIVE
    if rating < 3:
        return NEGATIVE
    return None


def first_sentence(text):
    """Prefix up to and including the first of . ! ?, or the whole text."""
    for i, ch in enumerate(text):
        if ch in _SENTENCE_END:
            return text[: i + 1].strip()
    return text.strip()


def length_filter(tokens, max_words=MAX_WORDS):
    return len(tokens) <= max_words


@dataclass
class Review:
    text: str
    rating: int


@dataclass
class Example:
    tokens: list
    sentiment: str
    raw_text: str
    token_ids: list = None
    emotional_positions: tuple = None


@dataclass
class DatasetSplits:
    train: list = field(default_factory=list)
    val: list = field(default_factory=list)
    test: list = field(default_factory=list)

    def all_examples(self):
        return list(self.train) + list(self.val) + list(self.test)


class Vocabulary:
    """Frequency-truncated token list behind a fixed reserved block."""

    def __init__(self, tokens, cap):
        self.cap = cap
        self.itos = list(RESERVED) + list(tokens)
        self.stoi = {t: i for i, t in enumerate(self.itos)}
        if len(self.stoi) != len(self.itos):
            raise ValueError("duplicate tokens in vocabulary")

    def __len__(self):
        return len(self.itos)

    def __contains__(self, token):
        return token in self.stoi

    def encode(self, tokens):
        return [self.stoi.get(t, UNK_ID) for t in tokens]

    def decode(self, ids):
        return [self.itos[i] for i in ids]

    def fingerprint(self):
        digest = hashlib.sha256("\n".join(self.itos).encode("utf-8")).hexdigest()
        return digest[:16]

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# reserved={','.join(RESERVED)} cap={self.cap}\n")
            for token in self.itos[len(RESERVED) :]:
                fh.write(token + "\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            header = fh.readline()
            if not header.startswith("#"):
                raise ValueError(f"{path}: missing vocabulary header")
            cap = int(header.rsplit("cap=", 1)[1])
            tokens = [line.rstrip("\n") for line in fh if line.rstrip("\n")]
        return cls(tokens, cap)


def build_vocab(token_sequences, cap):
    """Keep the `cap` most frequent tokens, ties broken lexicographically."""
    counts = Counter()
    for seq in token_sequences:
        counts.update(seq)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return Vocabulary([t for t, _ in ranked[:cap]], cap)


def encode_examples(examples, vocab):
    for ex in examples:
        ex.token_ids = vocab.encode(ex.tokens)
    return examples


def unknown_rate(examples):
    total = sum(len(ex.token_ids) for ex in examples)
    unk = sum(1 for ex in examples for i in ex.token_ids if i == UNK_ID)
    return unk / total if total else 0.0


# ---------------------------------------------------------------------------
# Raw-file parsing and the per-review processing pipeline
# ---------------------------------------------------------------------------


def parse_record(line, fmt):
    """Parse one raw line into a Review, or None if malformed."""
    line = line.rstrip("\n")
    if not line.strip():
        return None
    if fmt == "jsonl":
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            return None
        text = obj.get("text")
        rating = obj.get("rating")
    else:
        parts = line.split("\t", 1)
        if len(parts) != 2:
            return None
        try:
            rating = int(parts[0])
        except ValueError:
            return None
        text = parts[1]
    if not isinstance(text, str) or not text.strip():
        return None
    if isinstance(rating, bool) or not isinstance(rating, int) or rating not in (1, 2, 3, 4, 5):
        return None
    return Review(text=text, rating=rating)


def detect_format(path):
    name = str(path)
    if name.endswith(".jsonl") or name.endswith(".json"):
        return "jsonl"
    if name.endswith(".tsv"):
        return "tsv"
    with open(path, encoding="utf-8") as fh:
        probe = fh.readline().lstrip()
    return "jsonl" if probe.startswith("{") else "tsv"


def process_review(review, max_words=MAX_WORDS):
    """Run one review through the label/length/first-sentence stages.

    Returns (Example, None) on success or (None, drop_reason) otherwise.
    The length filter counts tokens of the whole review; the surviving
    example holds only its first sentence.
    """
    sentiment = label_from_rating(review.rating)
    if sentiment is None:
        return None, "rating_neutral"
    try:
        review_tokens = tokenize(review.text)
    except DegenerateInputError:
        return None, "empty_text"
    if not length_filter(review_tokens, max_words):
        return None, "too_long"
    sentence = first_sentence(review.text)
    try:
        tokens = tokenize(sentence)
    except DegenerateInputError:
        return None, "empty_text"
    return Example(tokens=tokens, sentiment=sentiment, raw_text=sentence), None


@dataclass
class IngestStats:
    total_records: int = 0
    malformed: int = 0
    empty_text: int = 0
    rating_neutral: int = 0
    too_long: int = 0
    low_confidence: int = 0
    kept: int = 0

    def as_dict(self):
        return dict(vars(self))


def assign_split(raw_text, proportions=(0.8, 0.1, 0.1)):
    """Deterministic hash bucketing of a sentence into train/val/test."""
    digest = hashlib.md5(raw_text.encode("utf-8")).hexdigest()
    u = int(digest[:8], 16) / 0xFFFFFFFF
    if u < proportions[0]:
        return "train"
    if u < proportions[0] + proportions[1]:
        return "val"
    return "test"


def _process_parsed(review, max_words):
    if review is None:
        return None, "malformed"
    return process_review(review, max_words)


def ingest_records(lines, fmt, max_words=MAX_WORDS, proportions=(0.8, 0.1, 0.1), workers=1):
    """Parse and filter raw lines into hash-bucketed splits plus drop statistics.

    Per-review stages are pure, so workers > 1 fans them out over a process
    pool; output order (and therefore every artifact) is identical either way.
    """
    stats = IngestStats()
    splits = DatasetSplits()
    reviews = []
    for line in lines:
        stats.total_records += 1
        reviews.append(parse_record(line, fmt))
    stage = partial(_process_parsed, max_words=max_words)
    if workers > 1:
        with Pool(workers) as pool:
            outcomes = pool.map(stage, reviews, chunksize=256)
    else:
        outcomes = [stage(r) for r in reviews]
    for example, reason in outcomes:
        if example is None:
            setattr(stats, reason, getattr(stats, reason) + 1)
            continue
        stats.kept += 1
        getattr(splits, assign_split(example.raw_text, proportions)).append(example)
    return splits, stats


def confidence_filter(example, classifier, threshold=CONFIDENCE_THRESHOLD):
    """Keep the example iff the classifier's probability of its own label >= threshold."""
    if not getattr(classifier, "trained", False):
        raise RuntimeError("confidence filter requires a trained classifier")
    return classifier.confidence(example.token_ids, example.sentiment) >= threshold


def apply_confidence_filter(examples, classifier, threshold=CONFIDENCE_THRESHOLD):
    kept = [ex for ex in examples if confidence_filter(ex, classifier, threshold)]
    return kept, len(examples) - len(kept)


# ---------------------------------------------------------------------------
# Processed-file round trip
# ---------------------------------------------------------------------------


def write_processed(path, examples):
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            record = {"tokens": ex.tokens, "sentiment": ex.sentiment, "raw_text": ex.raw_text}
            if ex.emotional_positions is not None:
                record["emotional_positions"] = list(ex.emotional_positions)
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def read_processed(path, vocab=None):
    examples = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            positions = obj.get("emotional_positions")
            examples.append(
                Example(
                    tokens=obj["tokens"],
                    sentiment=obj["sentiment"],
                    raw_text=obj["raw_text"],
                    emotional_positions=tuple(positions) if positions is not None else None,
                )
            )
    if vocab is not None:
        encode_examples(examples, vocab)
    return examples


# ---------------------------------------------------------------------------
# Synthetic corpus with ground-truth emotional positions
# ---------------------------------------------------------------------------


@dataclass
class TemplateSpec:
    """Slot-template description of the synthetic corpus.

    Templates are space-separated tokens; "{emotion}" is filled from the
    positive or negative inventory according to the sampled label, any other
    "{name}" slot from fillers[name]. Positions filled from the emotional
    inventories are recorded as ground truth on every generated example.
    """

    templates: list
    positive_words: list
    negative_words: list
    fillers: dict = field(default_factory=dict)
    n_train: int = 1800
    n_val: int = 150
    n_test: int = 150
    seed: int = 0

    def validate(self):
        overlap = set(self.positive_words) & set(self.negative_words)
        if overlap:
            raise ValueError(f"positive/negative inventories overlap: {sorted(overlap)}")
        if not self.templates:
            raise ValueError("template list is empty")
        for template in self.templates:
            seen_emotion = False
            for token in template.split():
                m = _SLOT_RE.match(token)
                if token == _EMOTION_SLOT:
                    seen_emotion = True
                elif m and m.group(1) not in self.fillers:
                    raise ValueError(f"template {template!r} uses unknown filler {token}")
            if not seen_emotion:
                raise ValueError(f"template {template!r} has no {_EMOTION_SLOT} slot")

    @classmethod
    def from_json(cls, path):
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
        return cls(**obj)

    def to_json(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(vars(self), fh, indent=2, sort_keys=True)
            fh.write("\n")


def default_template_spec(n_train=1800, n_val=150, n_test=150, seed=0):
    return TemplateSpec(
        templates=[
            "the {noun} is {emotion}",
            "the {noun} was {emotion}",
            "{emotion} {noun} !",
            "this {place} has {emotion} {noun}",
            "the {noun} at the {place} is {emotion}",
            "what a {emotion} {noun}",
            "their {noun} seems {emotion}",
            "i found the {noun} {emotion}",
            "{emotion} {noun} at this {place}",
            "the {noun} here is really {emotion}",
            "that {place} serves {emotion} {noun}",
            "my {noun} was {emotion} today",
        ],
        positive_words=[
            "delicious", "great", "wonderful", "amazing", "friendly", "lovely",
            "perfect", "excellent", "tasty", "charming", "fantastic", "superb",
            "pleasant", "brilliant", "awesome", "outstanding",
        ],
        negative_words=[
            "terrible", "awful", "horrible", "bland", "rude", "dirty",
            "boring", "disgusting", "stale", "noisy", "mediocre", "dreadful",
            "nasty", "lousy", "gross", "disappointing",
        ],
        fillers={
            "noun": [
                "food", "service", "coffee", "staff", "room", "menu", "pizza",
                "bread", "wine", "dessert", "parking", "music", "soup", "salad",
            ],
            "place": ["place", "cafe", "hotel", "shop", "diner", "bar", "market", "bakery"],
        },
        n_train=n_train,
        n_val=n_val,
        n_test=n_test,
        seed=seed,
    )


def _fill_template(template, sentiment, spec, rng):
    words = spec.positive_words if sentiment == POSITIVE else spec.negative_words
    tokens = []
    emotional = []
    for token in template.split():
        if token == _EMOTION_SLOT:
            emotional.append(len(tokens))
            tokens.append(words[rng.integers(len(words))])
        else:
            m = _SLOT_RE.match(token)
            if m:
                pool = spec.fillers[m.group(1)]
                tokens.append(pool[rng.integers(len(pool))])
            else:
                tokens.append(token)
    return tokens, tuple(emotional)


def synth_corpus(spec, rng_seed=None):
    """Generate deterministic, label-balanced splits of unique sentences.

    Returns (DatasetSplits, Vocabulary); token ids are encoded against a
    vocabulary built from the train split. Every example carries the
    ground-truth emotional positions of its template fill.
    """
    import numpy as np

    spec.validate()
    rng = np.random.default_rng(spec.seed if rng_seed is None else rng_seed)
    total = spec.n_train + spec.n_val + spec.n_test
    seen = set()
    examples = []
    attempts = 0
    budget = 500 * total
    while len(examples) < total:
        sentiment = SENTIMENTS[len(examples) % 2]
        template = spec.templates[rng.integers(len(spec.templates))]
        tokens, emotional = _fill_template(template, sentiment, spec, rng)
        raw = " ".join(tokens)
        attempts += 1
        if attempts > budget:
            raise ValueError("template space too small for the requested corpus size")
        if raw in seen:
            continue
        seen.add(raw)
        examples.append(
            Example(tokens=tokens, sentiment=sentiment, raw_text=raw, emotional_positions=emotional)
        )
    splits = DatasetSplits(
        train=examples[: spec.n_train],
        val=examples[spec.n_train : spec.n_train + spec.n_val],
        test=examples[spec.n_train + spec.n_val :],
    )
    vocab = build_vocab((ex.tokens for ex in splits.train), cap=200)
    encode_examples(splits.all_examples(), vocab)
    return splits, vocab
