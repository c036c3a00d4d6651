"""Command-line entry point wiring the full pipeline as subcommands."""

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

from . import corpus, training
from .classifier import SelfAttentionClassifier, accuracy, train_classifier
from .config import resolve_train_config, write_run_snapshot
from .emotionalizer import Emotionalizer, pretrain_emotionalizer
from .errors import TrainingError
from .evaluation import TextCNN, evaluate_transfers, train_eval_classifier
from .neutralizer import Neutralizer, pretrain_neutralizer
from .training import ModelTriplet, TrainConfig

EXIT_MISSING_ARTIFACT = 2
EXIT_DATA_ERROR = 3
EXIT_TRAINING_ERROR = 4

MALFORMED_ABORT_FRACTION = 0.10


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _add_train_flags(parser, names):
    defaults = TrainConfig()
    flag_types = {f.name: type(getattr(defaults, f.name)) for f in fields(TrainConfig)}
    for name in names:
        kind = flag_types[name]
        parser.add_argument(
            "--" + name.replace("_", "-"),
            dest=name,
            type=int if kind is int else float,
            default=None,
            help=f"{name.replace('_', ' ')} (default: {getattr(defaults, name)})",
        )


_ALL_TRAIN_FLAGS = [f.name for f in fields(TrainConfig) if f.name != "use_baseline"]


def _train_overrides(args):
    overrides = {n: getattr(args, n) for n in _ALL_TRAIN_FLAGS if hasattr(args, n)}
    if getattr(args, "no_baseline", False):
        overrides["use_baseline"] = False
    return overrides


def _resolve(args):
    return resolve_train_config(getattr(args, "config", None), overrides=_train_overrides(args))


def _require(path, what, producer):
    if not Path(path).exists():
        raise CliError(
            EXIT_MISSING_ARTIFACT,
            f"{what} not found at {path}; produce it with `cycletrans {producer}`",
        )
    return Path(path)


def _load_dataset(data_dir, need_splits=("train", "val", "test")):
    data_dir = Path(data_dir)
    vocab_path = _require(data_dir / "vocab.txt", "vocabulary", "ingest or synth")
    vocab = corpus.Vocabulary.load(vocab_path)
    splits = corpus.DatasetSplits()
    for name in need_splits:
        path = _require(data_dir / f"{name}.jsonl", f"{name} split", "ingest or synth")
        setattr(splits, name, corpus.read_processed(path, vocab))
    return splits, vocab


def _check_vocab(meta, vocab, source):
    if meta.get("vocab_hash") and meta["vocab_hash"] != vocab.fingerprint():
        raise CliError(
            EXIT_DATA_ERROR,
            f"{source} was trained with a different vocabulary (hash mismatch)",
        )


def _read_lines(path):
    if path == "-":
        return [line.rstrip("\n") for line in sys.stdin]
    with open(path, encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh]


def _write_lines(path, lines):
    text = "".join(line + "\n" for line in lines)
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_ingest(args):
    cfg = _resolve(args)
    in_path = _require(args.input, "raw review file", "ingest --input <file>")
    fmt = args.format or corpus.detect_format(in_path)
    proportions = tuple(float(p) for p in args.splits.split(","))
    if len(proportions) != 3 or abs(sum(proportions) - 1.0) > 1e-9:
        raise CliError(EXIT_DATA_ERROR, f"--splits must be three proportions summing to 1, got {args.splits}")
    with open(in_path, encoding="utf-8") as fh:
        splits, stats = corpus.ingest_records(
            fh, fmt, max_words=args.max_words, proportions=proportions, workers=args.workers
        )
    if stats.total_records and stats.malformed > MALFORMED_ABORT_FRACTION * stats.total_records:
        raise CliError(
            EXIT_DATA_ERROR,
            f"{stats.malformed}/{stats.total_records} records malformed (>10%); refusing to continue",
        )
    vocab = corpus.build_vocab((ex.tokens for ex in splits.train), cap=cfg.vocab_cap)
    corpus.encode_examples(splits.all_examples(), vocab)

    if args.classifier:
        ckpt = _require(args.classifier, "classifier checkpoint", "pretrain-classifier")
        clf = SelfAttentionClassifier.load(ckpt)
        from .nn.checkpoint import load_checkpoint

        _check_vocab(load_checkpoint(ckpt)[2], vocab, "confidence classifier")
        for name in ("train", "val", "test"):
            kept, dropped = corpus.apply_confidence_filter(
                getattr(splits, name), clf, args.min_confidence
            )
            setattr(splits, name, kept)
            stats.low_confidence += dropped
            stats.kept -= dropped

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name in ("train", "val", "test"):
        corpus.write_processed(out / f"{name}.jsonl", getattr(splits, name))
    vocab.save(out / "vocab.txt")
    summary = {
        "stats": stats.as_dict(),
        "splits": {n: len(getattr(splits, n)) for n in ("train", "val", "test")},
        "unknown_rate": corpus.unknown_rate(splits.all_examples()),
        "vocab_size": len(vocab),
    }
    with open(out / "stats.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_run_snapshot(out / "run.json", "ingest", cfg, {"input": str(in_path), "format": fmt})
    print(json.dumps(summary["stats"], sort_keys=True))
    return 0


def cmd_synth(args):
    cfg = _resolve(args)
    if args.spec:
        spec = corpus.TemplateSpec.from_json(_require(args.spec, "template spec", "synth --spec <file>"))
    else:
        spec = corpus.default_template_spec()
    if args.seed is not None:
        spec.seed = args.seed
    splits, vocab = corpus.synth_corpus(spec)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name in ("train", "val", "test"):
        corpus.write_processed(out / f"{name}.jsonl", getattr(splits, name))
    vocab.save(out / "vocab.txt")
    spec.to_json(out / "template_spec.json")
    write_run_snapshot(out / "run.json", "synth", cfg, {"seed": spec.seed})
    print(f"synthetic corpus: {len(splits.train)}/{len(splits.val)}/{len(splits.test)} "
          f"train/val/test, vocab {len(vocab)}")
    return 0


def cmd_pretrain_classifier(args):
    cfg = _resolve(args)
    splits, vocab = _load_dataset(args.data)
    model = SelfAttentionClassifier(len(vocab), cfg.embedding_size, cfg.hidden_size, seed=cfg.seed)
    losses = train_classifier(
        model, splits.train, cfg.classifier_epochs, cfg.learning_rate,
        cfg.batch_size, cfg.clip_norm, seed=cfg.seed + 1,
    )
    val_acc = accuracy(model, splits.val) if splits.val else float("nan")
    model.save(args.out, vocab.fingerprint(), cfg.seed)
    write_run_snapshot(Path(args.out).with_suffix(".run.json"), "pretrain-classifier", cfg)
    print(f"classifier: epoch losses {['%.4f' % l for l in losses]}, val accuracy {val_acc:.3f}")
    return 0


def _load_classifier_for(args, vocab):
    ckpt = _require(args.classifier, "classifier checkpoint", "pretrain-classifier")
    from .nn.checkpoint import load_checkpoint

    clf = SelfAttentionClassifier.load(ckpt)
    _check_vocab(load_checkpoint(ckpt)[2], vocab, "classifier checkpoint")
    return clf


def cmd_pretrain_neutralizer(args):
    cfg = _resolve(args)
    splits, vocab = _load_dataset(args.data)
    clf = _load_classifier_for(args, vocab)
    model = Neutralizer(len(vocab), cfg.embedding_size, cfg.hidden_size, seed=cfg.seed)
    losses = pretrain_neutralizer(
        model, clf, splits.train, cfg.neutralizer_epochs, cfg.learning_rate,
        cfg.batch_size, cfg.clip_norm, seed=cfg.seed + 2,
    )
    model.save(args.out, vocab.fingerprint(), cfg.seed)
    write_run_snapshot(Path(args.out).with_suffix(".run.json"), "pretrain-neutralizer", cfg)
    print(f"neutralizer: epoch losses {['%.4f' % l for l in losses]}")
    return 0


def cmd_pretrain_emotionalizer(args):
    cfg = _resolve(args)
    splits, vocab = _load_dataset(args.data)
    clf = _load_classifier_for(args, vocab)
    model = Emotionalizer(len(vocab), cfg.embedding_size, cfg.hidden_size, seed=cfg.seed)
    losses = pretrain_emotionalizer(
        model, clf, splits.train, cfg.emotionalizer_epochs, cfg.learning_rate,
        cfg.batch_size, cfg.clip_norm, seed=cfg.seed + 3,
    )
    model.save(args.out, vocab.fingerprint(), cfg.seed)
    write_run_snapshot(Path(args.out).with_suffix(".run.json"), "pretrain-emotionalizer", cfg)
    print(f"emotionalizer: epoch losses {['%.4f' % l for l in losses]}")
    return 0


def cmd_train(args):
    cfg = _resolve(args)
    splits, vocab = _load_dataset(args.data)
    result = training.train(splits, vocab, cfg, out_dir=args.out_dir)
    print(f"checkpoints and reward log written to {result.out_dir}")
    return 0


def _load_triplet(checkpoint_dir, vocab):
    ckpt_dir = Path(checkpoint_dir)
    from .nn.checkpoint import load_checkpoint

    models = {}
    for name, cls in (
        ("classifier", SelfAttentionClassifier),
        ("neutralizer", Neutralizer),
        ("emotionalizer", Emotionalizer),
    ):
        path = _require(ckpt_dir / f"{name}.npz", f"{name} checkpoint", "train")
        models[name] = cls.load(path)
        _check_vocab(load_checkpoint(path)[2], vocab, f"{name} checkpoint")
    return ModelTriplet(**models)


def cmd_translate(args):
    cfg = _resolve(args)
    _require(Path(args.data) / "vocab.txt", "vocabulary", "ingest or synth")
    vocab = corpus.Vocabulary.load(Path(args.data) / "vocab.txt")
    models = _load_triplet(args.checkpoints, vocab)
    out_lines = []
    for line in _read_lines(args.input):
        if not line.strip():
            out_lines.append("")
            continue
        ids = vocab.encode(corpus.tokenize(line))
        out_ids = training.translate_tokens(models, ids, args.to, cfg.max_len)
        out_lines.append(" ".join(vocab.decode(out_ids)))
    _write_lines(args.output, out_lines)
    return 0


def cmd_evaluate(args):
    splits, vocab = _load_dataset(args.data)
    sources = [corpus.tokenize(line) for line in _read_lines(args.source)]
    generated = [corpus.tokenize(line) if line.strip() else [] for line in _read_lines(args.generated)]
    targets = _read_lines(args.targets)
    if not (len(sources) == len(generated) == len(targets)):
        raise CliError(EXIT_DATA_ERROR, "source/generated/targets line counts differ")
    bad = [t for t in targets if t not in corpus.SENTIMENTS]
    if bad:
        raise CliError(EXIT_DATA_ERROR, f"invalid target sentiment {bad[0]!r}")
    seed = args.seed if args.seed is not None else 0
    if args.eval_classifier and Path(args.eval_classifier).exists():
        judge = TextCNN.load(args.eval_classifier)
    else:
        judge = train_eval_classifier(splits.train, len(vocab), epochs=args.eval_epochs, seed=seed)
        if args.eval_classifier:
            judge.save(args.eval_classifier, vocab.fingerprint(), seed)
    report = evaluate_transfers(sources, generated, targets, _IdJudge(judge, vocab))
    if args.out:
        report.to_json(args.out)
    print(report.table())
    return 0


class _IdJudge:
    """Adapts the id-based TextCNN to surface-token inputs."""

    def __init__(self, model, vocab):
        self.model = model
        self.vocab = vocab
        self.trained = model.trained

    def predict(self, tokens):
        return self.model.predict(self.vocab.encode(tokens))


def cmd_inspect_attention(args):
    vocab = corpus.Vocabulary.load(_require(Path(args.data) / "vocab.txt", "vocabulary", "ingest or synth"))
    from .nn.checkpoint import load_checkpoint

    if args.use_classifier:
        path = _require(args.checkpoint, "classifier checkpoint", "pretrain-classifier")
        model = SelfAttentionClassifier.load(path)
    else:
        path = _require(args.checkpoint, "neutralizer checkpoint", "pretrain-neutralizer or train")
        model = Neutralizer.load(path)
    _check_vocab(load_checkpoint(path)[2], vocab, "checkpoint")
    out_lines = []
    for line in _read_lines(args.input):
        if not line.strip():
            out_lines.append("")
            continue
        tokens = corpus.tokenize(line)
        ids = vocab.encode(tokens)
        if args.use_classifier:
            from .classifier import discretize

            mask = discretize(model.attention_weights(ids))
        else:
            mask = model.greedy_mask(ids).mask
        rendered = [t if m else f"[{t}]" for t, m in zip(tokens, mask)]
        out_lines.append(" ".join(rendered))
    _write_lines(args.output, out_lines)
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cycletrans",
        description="Sentiment-to-sentiment rewriting: separate emotional words from "
        "content, re-attach the target sentiment, train the loop with rewards.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, train_flags=_ALL_TRAIN_FLAGS):
        p.add_argument("--config", default=None, help="JSON config file (overridden by env and flags)")
        _add_train_flags(p, train_flags)

    p = sub.add_parser("ingest", help="process raw reviews into labeled splits and a vocabulary")
    p.add_argument("--input", required=True, help="raw reviews (.jsonl with text/rating or rating<TAB>text)")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--format", choices=("jsonl", "tsv"), default=None)
    p.add_argument("--max-words", type=int, default=corpus.MAX_WORDS,
                   help=f"drop reviews longer than this many tokens (default: {corpus.MAX_WORDS})")
    p.add_argument("--splits", default="0.8,0.1,0.1", help="train,val,test proportions")
    p.add_argument("--classifier", default=None, help="apply the confidence filter with this checkpoint")
    p.add_argument("--min-confidence", type=float, default=corpus.CONFIDENCE_THRESHOLD,
                   help=f"confidence filter threshold (default: {corpus.CONFIDENCE_THRESHOLD})")
    p.add_argument("--workers", type=int, default=1,
                   help="parallel workers for the per-review stages (default: 1)")
    common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="generate the deterministic synthetic corpus")
    p.add_argument("--spec", default=None, help="template spec JSON (built-in spec when omitted)")
    p.add_argument("--out-dir", required=True)
    common(p)
    p.set_defaults(func=cmd_synth)

    for name, fn, needs_classifier in (
        ("pretrain-classifier", cmd_pretrain_classifier, False),
        ("pretrain-neutralizer", cmd_pretrain_neutralizer, True),
        ("pretrain-emotionalizer", cmd_pretrain_emotionalizer, True),
    ):
        p = sub.add_parser(name, help=f"{name.replace('-', ' ')} on a processed dataset")
        p.add_argument("--data", required=True, help="directory from ingest/synth")
        p.add_argument("--out", required=True, help="checkpoint output path (.npz)")
        if needs_classifier:
            p.add_argument("--classifier", required=True, help="trained classifier checkpoint")
        common(p)
        p.set_defaults(func=fn)

    p = sub.add_parser("train", help="full schedule: pre-training plus cycled iterations")
    p.add_argument("--data", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--no-baseline", action="store_true",
                   help="disable moving-average reward centering (literal estimator)")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("translate", help="rewrite sentences toward a target sentiment")
    p.add_argument("--data", required=True, help="dataset directory holding vocab.txt")
    p.add_argument("--checkpoints", required=True, help="directory with the trained model triplet")
    p.add_argument("--to", required=True, choices=corpus.SENTIMENTS)
    p.add_argument("--input", default="-", help="one sentence per line (default: stdin)")
    p.add_argument("--output", default="-", help="default: stdout")
    common(p, ["max_len", "seed"])
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("evaluate", help="score generated sentences: accuracy, BLEU, G-score")
    p.add_argument("--data", required=True, help="labeled dataset used to train the judge")
    p.add_argument("--source", required=True)
    p.add_argument("--generated", required=True)
    p.add_argument("--targets", required=True, help="one target sentiment per line")
    p.add_argument("--eval-classifier", default=None, help="load (or save) the judge checkpoint here")
    p.add_argument("--eval-epochs", type=int, default=4)
    p.add_argument("--out", default=None, help="write the JSON report here")
    common(p, ["seed"])
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("inspect-attention", help="print sentences with removed words bracketed")
    p.add_argument("--data", required=True, help="dataset directory holding vocab.txt")
    p.add_argument("--checkpoint", required=True, help="neutralizer (or classifier) checkpoint")
    p.add_argument("--use-classifier", action="store_true",
                   help="show the classifier's discretized attention instead of the tagger mask")
    p.add_argument("--input", default="-")
    p.add_argument("--output", default="-")
    common(p, ["seed"])
    p.set_defaults(func=cmd_inspect_attention)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as err:
        print(f"error: {err}", file=sys.stderr)
        return err.code
    except TrainingError as err:
        print(f"error[training]: {err}", file=sys.stderr)
        return EXIT_TRAINING_ERROR
    except (ValueError, OSError) as err:
        print(f"error[data]: {err}", file=sys.stderr)
        return EXIT_DATA_ERROR


if __name__ == "__main__":
    sys.exit(main())
