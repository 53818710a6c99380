"""Command-line surface: extract, train, eval, generate, check.

Every subcommand is a thin wrapper over a library call. Exit codes:
0 success, 1 verification or run failure, 2 usage error, 3 I/O error
(unreadable, unwritable, or malformed files). Relative input paths are
retried under $PAIRSENT_DATA_DIR when they do not resolve as given;
outputs always go exactly where the --out flags point.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import asdict, fields
from pathlib import Path

from . import checks, evaluation, extraction, report, synth, training
from .corpus import (CorpusError, default_stopwords, load_corpus,
                     load_embeddings, split_corpus)
from .extraction import ExtractionError
from .model import Checkpoint, ModelError, load_checkpoint, save_checkpoint
from .synth import SynthError
from .training import TrainConfig, TrainingError

DATA_DIR_ENV = "PAIRSENT_DATA_DIR"


class UsageError(Exception):
    pass


def _in_path(p: str) -> Path:
    """Resolve an input path, falling back to $PAIRSENT_DATA_DIR for
    relative paths that do not exist as given."""
    path = Path(p)
    if not path.exists() and not path.is_absolute():
        base = os.environ.get(DATA_DIR_ENV)
        if base and (Path(base) / path).exists():
            return Path(base) / path
    return path


def _load_split(args, profile: str, ratios, split_seed: int):
    docs = load_corpus(_in_path(args.corpus), profile=profile)
    return split_corpus(docs, ratios=ratios, seed=split_seed), docs


def _parse_ratios(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise UsageError("--split-ratios needs three comma-separated numbers")
    try:
        r = tuple(float(x) for x in parts)
    except ValueError:
        raise UsageError(f"bad --split-ratios {text!r}") from None
    if any(x < 0 for x in r) or sum(r) <= 0:
        raise UsageError("--split-ratios must be nonnegative with a positive sum")
    return r


def _stopwords(profile: str):
    return default_stopwords() if profile == "clinical" else None


# ---------------------------------------------------------------------------

def cmd_extract(args) -> int:
    docs = load_corpus(_in_path(args.corpus), profile=args.profile)
    if args.mode == "window":
        if not args.lexicon:
            raise UsageError("--mode window requires --lexicon")
        lex = extraction.load_lexicon_spec(_in_path(args.lexicon))
        pairs = []
        for doc in docs:
            pairs.extend(extraction.window_extract(doc, lex))
        names = [lex.aspect_name]
        lines = [f"{extraction.WINDOW}\t{len(pairs)}\t0"]
    else:
        if not args.aspects:
            raise UsageError("parsed mode requires --aspects")
        if not args.embeddings:
            raise UsageError("parsed mode requires --embeddings (aspect assignment)")
        emb_vocab, emb = load_embeddings(_in_path(args.embeddings))
        aspects, implicit = extraction.load_aspects(_in_path(args.aspects), emb_vocab)
        if args.rules:
            ruleset = set(args.rules.split(","))
            bad = ruleset - set(extraction.RULES)
            if bad:
                raise UsageError(f"unknown rules: {sorted(bad)}")
        else:
            ruleset = set(extraction.RULES)
        pairs, rep = extraction.extract_all(docs, ruleset, aspects, emb_vocab, emb,
                                            implicit, threads=args.threads)
        names = [a.name for a in aspects]
        lines = rep.lines()
    extraction.save_pairs(pairs, names, args.out)
    print("rule\temitted\tdropped")
    for line in lines:
        print(line)
    print(f"wrote {len(pairs)} pairs to {args.out}")
    return 0


def cmd_train(args) -> int:
    # Precedence: built-in defaults, then the config file, then explicit flags.
    overrides: dict = {}
    if args.config:
        try:
            overrides.update(training.read_train_config(_in_path(args.config)))
        except TrainingError as exc:
            raise UsageError(str(exc)) from None
    for field in fields(TrainConfig):
        value = getattr(args, field.name, None)
        if value is not None:
            overrides[field.name] = value
    try:
        cfg = TrainConfig(**overrides)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    ratios = _parse_ratios(args.split_ratios)
    (train_docs, dev_docs, _), _ = _load_split(args, args.profile, ratios,
                                               args.split_seed)
    aspect_names = extraction.pair_file_aspects(_in_path(args.pairs))
    pairs = extraction.load_pairs(_in_path(args.pairs), aspect_names)

    if cfg.objective == training.NEG_SAMPLING_L3:
        train_ids = {d.id for d in train_docs}
        for aid, name in enumerate(aspect_names):
            vocab = {p.opinion for p in pairs
                     if p.aspect_id == aid and p.doc_id in train_ids}
            if len(vocab) == 1:
                raise UsageError(
                    f"aspect {name!r} has a single opinion word in the training "
                    f"split; the sampled objective needs at least two")

    emb = None
    if args.embeddings:
        emb = load_embeddings(_in_path(args.embeddings))
    elif cfg.beta > 0:
        print("warning: --beta > 0 without --embeddings; "
              "similarity regularizer will be inert", file=sys.stderr)

    stop = _stopwords(args.profile)
    result = training.train(train_docs, pairs, cfg, aspect_names,
                            dev_docs=dev_docs, emb=emb, stopwords=stop)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    config = dict(asdict(cfg), split_ratios=list(ratios), profile=args.profile,
                  aspect_names=aspect_names)
    ckpt = Checkpoint(num_classes=cfg.num_classes, feature_vocab=result.feature_vocab,
                      aspects=result.aspects, config=config,
                      split_seed=args.split_seed)
    save_checkpoint(ckpt, out_dir / "checkpoint.json")
    training.write_history(result.history, out_dir / "history.tsv")
    report.render_history(result.history, out_dir / "history.png")
    if result.history:
        last = result.history[-1]
        print(f"epoch {last.epoch}: objective {last.objective:.4f}, "
              f"dev accuracy {last.dev_accuracy:.4f}")
    print(f"wrote {out_dir / 'checkpoint.json'}, history.tsv, history.png")
    return 0


def _select_split(splits, all_docs, which: str):
    train_docs, dev_docs, test_docs = splits
    return {"train": train_docs, "dev": dev_docs, "test": test_docs,
            "all": all_docs}[which]


def cmd_eval(args) -> int:
    rows: list[evaluation.MetricRow] = []
    if args.baseline is None and not args.checkpoint:
        raise UsageError("model evaluation requires --checkpoint")

    if args.checkpoint:
        ckpt = load_checkpoint(_in_path(args.checkpoint))
        profile = ckpt.config.get("profile", "default")
        ratios = tuple(ckpt.config.get("split_ratios", (8, 1, 1)))
        split_seed = ckpt.split_seed
    else:
        profile = args.profile
        ratios = _parse_ratios(args.split_ratios)
        split_seed = args.split_seed
    splits, all_docs = _load_split(args, profile, ratios, split_seed)
    eval_docs = _select_split(splits, all_docs, args.split)
    stop = _stopwords(profile)

    if args.baseline is None:
        accs = evaluation.evaluate_all(ckpt.aspects, ckpt.feature_vocab, eval_docs,
                                       stop, threads=args.threads)
        for name, acc in accs.items():
            if name != "mean":
                rows.append(evaluation.MetricRow(name, "model", args.split, acc, 0.0))
        rows.append(evaluation.MetricRow("mean", "model", args.split, accs["mean"], 0.0))
    elif args.baseline == "majority":
        names = sorted({k for d in eval_docs for k in d.gold_labels})
        if not names:
            raise evaluation.EvaluationError(
                f"no gold labels in the {args.split!r} split")
        accs = []
        for name in names:
            acc = evaluation.majority_baseline(splits[0], eval_docs, name)
            rows.append(evaluation.MetricRow(name, "majority", args.split, acc, 0.0))
            accs.append(acc)
        rows.append(evaluation.MetricRow("mean", "majority", args.split,
                                         sum(accs) / len(accs), 0.0))
    else:
        if not args.pairs or not args.lexicon_file:
            raise UsageError(f"--baseline {args.baseline} requires --pairs and "
                             f"--lexicon-file")
        aspect_names = extraction.pair_file_aspects(_in_path(args.pairs))
        pairs = extraction.load_pairs(_in_path(args.pairs), aspect_names)
        lex = evaluation.load_opinion_lexicon(_in_path(args.lexicon_file))
        mode = "R" if args.baseline == "lexicon-r" else "O"
        per = evaluation.lexicon_baseline(eval_docs, pairs, lex, mode, aspect_names,
                                          trials=args.trials, seed=args.seed)
        means = []
        for name, (mean, std) in per.items():
            rows.append(evaluation.MetricRow(name, f"lexicon-{mode.lower()}",
                                             args.split, mean, std))
            means.append(mean)
        rows.append(evaluation.MetricRow("mean", f"lexicon-{mode.lower()}",
                                         args.split, sum(means) / len(means), 0.0))

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    evaluation.write_metrics(rows, out_dir / "metrics.jsonl")
    report.render_metrics(rows, out_dir / "metrics.png")
    print("aspect\tmethod\tsplit\tmean\tstd")
    for r in rows:
        print(f"{r.aspect}\t{r.method}\t{r.split}\t{r.mean:.4f}\t{r.std:.4f}")
    print(f"wrote {out_dir / 'metrics.jsonl'}, metrics.png")
    return 0


def cmd_generate(args) -> int:
    try:
        cfg = synth.SynthConfig(
            num_docs=args.num_docs, num_aspects=args.num_aspects,
            num_classes=args.num_classes, targets_per_aspect=args.targets_per_aspect,
            opinions_per_class=args.opinions_per_class,
            filler_vocab_size=args.filler_vocab, doc_length=args.doc_length,
            pair_rate=args.pair_rate, class_separation=args.separation,
            seed=args.seed)
    except SynthError as exc:
        raise UsageError(str(exc)) from None
    data = synth.generate(cfg)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    synth.write_synth(data, out_dir / "corpus.jsonl", out_dir / "pairs.tsv",
                      out_dir / "embeddings.txt")
    print(f"wrote {cfg.num_docs} docs, {len(data.pairs)} pairs to {out_dir}")
    if cfg.num_classes == 2:
        print(f"Bayes-optimal accuracy at this separation: "
              f"{synth.bayes_accuracy(cfg):.4f}")
    return 0


def cmd_check(args) -> int:
    results = checks.run_all_checks(seed=args.seed)
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 1 if failed else 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="pairsent",
        description="Unsupervised aspect-polarity classification trained from "
                    "target-opinion word pairs.")
    sub = p.add_subparsers(dest="command", required=True)
    dflt = TrainConfig()

    ext = sub.add_parser("extract", help="extract target-opinion pairs")
    ext.add_argument("--corpus", required=True)
    ext.add_argument("--out", required=True)
    ext.add_argument("--mode", choices=["parsed", "window"], default="parsed")
    ext.add_argument("--aspects", help="aspect config (parsed mode)")
    ext.add_argument("--embeddings", help="embedding file (parsed mode)")
    ext.add_argument("--rules", help="comma-separated subset, e.g. R1,R2")
    ext.add_argument("--lexicon", help="lexicon config (window mode)")
    ext.add_argument("--profile", choices=["default", "clinical"], default="default")
    ext.add_argument("--threads", type=int, default=1)
    ext.set_defaults(func=cmd_extract)

    tr = sub.add_parser("train", help="train per-aspect polarity classifiers")
    tr.add_argument("--corpus", required=True)
    tr.add_argument("--pairs", required=True)
    tr.add_argument("--out-dir", required=True)
    tr.add_argument("--embeddings")
    tr.add_argument("--config", help="[train] config file; flags override it")
    tr.add_argument("--objective", choices=list(training.OBJECTIVES),
                    help=f"default {dflt.objective}")
    tr.add_argument("--alpha", type=float, help=f"default {dflt.alpha}")
    tr.add_argument("--beta", type=float, help=f"default {dflt.beta}")
    tr.add_argument("--gamma", type=float, help=f"default {dflt.gamma}")
    tr.add_argument("--negatives", type=int, help=f"default {dflt.negatives}")
    tr.add_argument("--pairs-per-doc", type=int,
                    help=f"default {dflt.pairs_per_doc}")
    tr.add_argument("--batch-size", type=int, help=f"default {dflt.batch_size}")
    tr.add_argument("--epochs", type=int, help=f"default {dflt.epochs}")
    tr.add_argument("--seed", type=int, help=f"default {dflt.seed}")
    tr.add_argument("--weight-decay", type=float,
                    help=f"default {dflt.weight_decay}")
    tr.add_argument("--dropout", type=float, help=f"default {dflt.dropout}")
    tr.add_argument("--prior", choices=["uniform", "learned"],
                    help=f"default {dflt.prior}")
    tr.add_argument("--estimator", dest="grad_estimator",
                    choices=[training.EXACT_EXPECTATION,
                             training.LIKELIHOOD_RATIO],
                    help=f"default {dflt.grad_estimator}")
    tr.add_argument("--estimator-samples", type=int,
                    help=f"default {dflt.estimator_samples}")
    tr.add_argument("--optimizer", choices=["adadelta", "sgd"],
                    help=f"default {dflt.optimizer}")
    tr.add_argument("--learning-rate", type=float,
                    help=f"default {dflt.learning_rate}")
    tr.add_argument("--num-classes", type=int, help=f"default {dflt.num_classes}")
    tr.add_argument("--min-count", type=int, help=f"default {dflt.min_count}")
    tr.add_argument("--split-ratios", default="8,1,1")
    tr.add_argument("--split-seed", type=int, default=13)
    tr.add_argument("--profile", choices=["default", "clinical"], default="default")
    tr.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", help="evaluate a checkpoint or a baseline")
    ev.add_argument("--corpus", required=True)
    ev.add_argument("--out-dir", required=True)
    ev.add_argument("--checkpoint")
    ev.add_argument("--split", choices=["train", "dev", "test", "all"], default="test")
    ev.add_argument("--baseline", choices=["majority", "lexicon-r", "lexicon-o"])
    ev.add_argument("--pairs", help="pair file (lexicon baselines)")
    ev.add_argument("--lexicon-file", help="two-section opinion word list")
    ev.add_argument("--trials", type=int, default=5)
    ev.add_argument("--seed", type=int, default=42)
    ev.add_argument("--threads", type=int, default=1)
    ev.add_argument("--split-ratios", default="8,1,1",
                    help="used only without --checkpoint")
    ev.add_argument("--split-seed", type=int, default=13,
                    help="used only without --checkpoint")
    ev.add_argument("--profile", choices=["default", "clinical"], default="default",
                    help="used only without --checkpoint")
    ev.set_defaults(func=cmd_eval)

    gen = sub.add_parser("generate", help="generate a synthetic labeled corpus")
    gen.add_argument("--out-dir", required=True)
    gen.add_argument("--num-docs", type=int, default=1000)
    gen.add_argument("--num-aspects", type=int, default=2)
    gen.add_argument("--num-classes", type=int, default=2)
    gen.add_argument("--targets-per-aspect", type=int, default=3)
    gen.add_argument("--opinions-per-class", type=int, default=4)
    gen.add_argument("--filler-vocab", type=int, default=20)
    gen.add_argument("--doc-length", type=int, default=40)
    gen.add_argument("--pair-rate", type=float, default=3.0)
    gen.add_argument("--separation", type=float, default=1.0)
    gen.add_argument("--seed", type=int, default=42)
    gen.set_defaults(func=cmd_generate)

    ch = sub.add_parser("check", help="run the self-verification suites")
    ch.add_argument("--seed", type=int, default=42)
    ch.set_defaults(func=cmd_check)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse: 2 on usage error, 0 on --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (CorpusError, ExtractionError, ModelError, OSError) as exc:
        print(f"error reading or writing files: {exc}", file=sys.stderr)
        return 3
    except (TrainingError, evaluation.EvaluationError, SynthError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
