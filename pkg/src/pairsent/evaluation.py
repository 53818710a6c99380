"""Cluster-to-label evaluation and reference baselines.

The trained classifier's class indices are arbitrary, so accuracy is
computed after matching clusters to gold labels with a minimum-cost
assignment over negated agreement counts. Baselines: majority label from
the training split, and lexicon voting over extracted opinion words with
negation flips, resolving ties either randomly (R) or by the document's
overall polarity (O).
"""

from __future__ import annotations

import itertools
import json
import logging
from collections import Counter
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .corpus import Document, Vocab, feature_matrix
from .extraction import WordPair
from .model import SentimentModel, softmax

log = logging.getLogger(__name__)

DEFAULT_NEGATION_WORDS = frozenset({"no", "not", "never", "n't"})
NEGATION_WINDOW = 3


class EvaluationError(Exception):
    pass


# ---------------------------------------------------------------------------
# Assignment

def hungarian(cost: np.ndarray) -> np.ndarray:
    """Minimum-cost assignment as a permutation: perm[row] = column.

    Among cost-equal optima, returns the lexicographically smallest
    permutation: each row in turn takes the smallest column that still
    allows the remaining rows to reach the optimal total.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise EvaluationError(f"cost matrix must be square, got {cost.shape}")
    if not np.isfinite(cost).all():
        raise EvaluationError("cost matrix contains non-finite entries")
    n = cost.shape[0]
    rows, cols = linear_sum_assignment(cost)
    best = float(cost[rows, cols].sum())
    tol = 1e-9 * max(1.0, abs(best))

    perm = np.empty(n, dtype=np.intp)
    remaining = list(range(n))
    prefix = 0.0
    for i in range(n):
        for l in remaining:
            rest = [c for c in remaining if c != l]
            sub = 0.0
            if rest:
                block = cost[np.ix_(range(i + 1, n), rest)]
                r, c = linear_sum_assignment(block)
                sub = float(block[r, c].sum())
            if prefix + cost[i, l] + sub <= best + tol:
                perm[i] = l
                prefix += cost[i, l]
                remaining.remove(l)
                break
        else:
            raise EvaluationError("assignment search failed to extend a prefix")
    return perm


def brute_force_assignment(cost: np.ndarray) -> tuple[np.ndarray, float]:
    """Exhaustive minimum over all permutations (lexicographically smallest
    winner). Oracle for hungarian; factorial, keep n small."""
    cost = np.asarray(cost, dtype=np.float64)
    n = cost.shape[0]
    best_perm, best_cost = None, np.inf
    for perm in itertools.permutations(range(n)):
        total = float(cost[np.arange(n), perm].sum())
        if total < best_cost - 1e-12:
            best_perm, best_cost = perm, total
    return np.array(best_perm, dtype=np.intp), best_cost


def accuracy_with_assignment(pred: np.ndarray, gold: np.ndarray,
                             num_classes: int) -> float:
    """Accuracy after optimally matching cluster ids to gold labels."""
    pred = np.asarray(pred)
    gold = np.asarray(gold)
    if pred.shape != gold.shape or pred.size == 0:
        raise EvaluationError("predictions and gold labels must be equal-length and non-empty")
    if gold.min() < 0 or gold.max() >= num_classes or pred.max() >= num_classes:
        raise EvaluationError("label outside [0, num_classes)")
    counts = np.zeros((num_classes, num_classes))
    np.add.at(counts, (pred, gold), 1.0)
    perm = hungarian(-counts)
    matched = counts[np.arange(num_classes), perm].sum()
    return float(matched) / pred.size


# ---------------------------------------------------------------------------
# Model evaluation

def evaluate_aspect(sentiment: SentimentModel, docs: list[Document],
                    aspect: str, feature_vocab: Vocab,
                    stopwords: frozenset[str] | None = None) -> tuple[float, int]:
    """Assignment-invariant accuracy for one aspect; returns (accuracy, n).

    Documents without a gold label for the aspect are skipped; none at all
    is an error.
    """
    kept = [d for d in docs if aspect in d.gold_labels]
    if not kept:
        raise EvaluationError(f"no document carries a gold label for aspect {aspect!r}")
    gold = np.array([d.gold_labels[aspect] for d in kept])
    X = feature_matrix(kept, feature_vocab, stopwords)
    q = softmax(X @ sentiment.W.T, axis=-1)
    pred = np.argmax(q, axis=1)  # ties resolve to the lowest class index
    return accuracy_with_assignment(pred, gold, sentiment.num_classes), len(kept)


def evaluate_all(aspects, feature_vocab: Vocab, docs: list[Document],
                 stopwords: frozenset[str] | None = None,
                 threads: int = 1) -> dict[str, float]:
    """Per-aspect accuracies plus their unweighted mean under key "mean".

    aspects maps aspect name to a checkpoint entry with a .sentiment model.
    Aspects with no gold labels in docs are skipped with a warning.
    threads > 1 evaluates aspects in a thread pool; output is identical.
    """
    def one(item):
        name, entry = item
        try:
            acc, _ = evaluate_aspect(entry.sentiment, docs, name, feature_vocab,
                                     stopwords)
        except EvaluationError:
            log.warning("aspect %r has no gold labels in this split; skipped", name)
            return name, None
        return name, acc

    items = list(aspects.items())
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(one, items))
    else:
        results = [one(it) for it in items]
    out = {name: acc for name, acc in results if acc is not None}
    if not out:
        raise EvaluationError("no aspect could be evaluated (no gold labels)")
    out["mean"] = sum(out.values()) / len(out)
    return out


# ---------------------------------------------------------------------------
# Baselines

def majority_baseline(train_docs: list[Document], eval_docs: list[Document],
                      aspect: str) -> float:
    """Accuracy of always predicting the training-majority label."""
    counts = Counter(d.gold_labels[aspect] for d in train_docs
                     if aspect in d.gold_labels)
    if not counts:
        raise EvaluationError(f"no training gold labels for aspect {aspect!r}")
    top = max(counts.values())
    majority = min(lbl for lbl, c in counts.items() if c == top)
    gold = [d.gold_labels[aspect] for d in eval_docs if aspect in d.gold_labels]
    if not gold:
        raise EvaluationError(f"no evaluation gold labels for aspect {aspect!r}")
    return sum(1 for g in gold if g == majority) / len(gold)


@dataclass(frozen=True)
class OpinionLexicon:
    positive: frozenset[str]
    negative: frozenset[str]
    negation_words: frozenset[str] = DEFAULT_NEGATION_WORDS

    def __post_init__(self):
        overlap = self.positive & self.negative
        if overlap:
            raise EvaluationError(
                f"lexicon lists {sorted(overlap)[:5]} as both positive and negative")
        if not self.positive and not self.negative:
            raise EvaluationError("empty opinion lexicon")


def load_opinion_lexicon(path, negation_words: frozenset[str] = DEFAULT_NEGATION_WORDS,
                         ) -> OpinionLexicon:
    """Two-section word list: a [positive] header, one word per line, then a
    [negative] header. Blank lines and # comments are ignored."""
    sections: dict[str, set[str]] = {"positive": set(), "negative": set()}
    current = None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("[") and line.endswith("]"):
                name = line[1:-1].strip().lower()
                if name not in sections:
                    raise EvaluationError(f"{path}:{lineno}: unknown section {name!r}")
                current = name
                continue
            if current is None:
                raise EvaluationError(f"{path}:{lineno}: word before any section header")
            sections[current].add(line.lower())
    return OpinionLexicon(positive=frozenset(sections["positive"]),
                          negative=frozenset(sections["negative"]),
                          negation_words=negation_words)


def _negated(doc: Document, word: str, negation_words: frozenset[str],
             window: int = NEGATION_WINDOW) -> bool:
    """Whether the word's first occurrence has a negation word within the
    `window` tokens preceding it in its sentence."""
    for sent in doc.sentences:
        forms = [t.form.lower() for t in sent.tokens]
        for i, form in enumerate(forms):
            if form == word:
                return any(f in negation_words for f in forms[max(0, i - window):i])
    return False


def lexicon_baseline(docs: list[Document], pairs: list[WordPair],
                     lexicon: OpinionLexicon, mode: str, aspect_names: list[str],
                     trials: int = 5, seed: int = 0,
                     num_classes: int = 2) -> dict[str, tuple[float, float]]:
    """Majority vote of extracted opinion words, per aspect.

    Each pair's opinion word votes +1 if positive, -1 if negative (words in
    neither set abstain); the vote flips when a negation word precedes the
    word in its sentence. Vote ties: mode "R" guesses a uniform label, mode
    "O" uses the document's overall polarity (uniform guess when absent).
    Returns {aspect: (mean, std)} over `trials` seeded runs; std is the
    population deviation, 0 when no document ever ties.
    """
    if mode not in ("R", "O"):
        raise EvaluationError(f"unknown lexicon mode {mode!r}")
    votes_by_doc_aspect: dict[tuple[str, int], int] = {}
    doc_by_id = {d.id: d for d in docs}
    for p in pairs:
        doc = doc_by_id.get(p.doc_id)
        if doc is None:
            continue
        if p.opinion in lexicon.positive:
            v = 1
        elif p.opinion in lexicon.negative:
            v = -1
        else:
            continue
        if _negated(doc, p.opinion, lexicon.negation_words):
            v = -v
        key = (p.doc_id, p.aspect_id)
        votes_by_doc_aspect[key] = votes_by_doc_aspect.get(key, 0) + v

    rng = np.random.default_rng(seed)
    out: dict[str, tuple[float, float]] = {}
    for aspect_id, name in enumerate(aspect_names):
        labeled = [d for d in docs if name in d.gold_labels]
        if not labeled:
            continue
        accs = []
        for _ in range(trials):
            hits = 0
            for d in labeled:
                votes = votes_by_doc_aspect.get((d.id, aspect_id), 0)
                if votes > 0:
                    pred = 1
                elif votes < 0:
                    pred = 0
                elif mode == "O" and d.overall_polarity is not None:
                    pred = d.overall_polarity
                else:
                    pred = int(rng.integers(num_classes))
                hits += int(pred == d.gold_labels[name])
            accs.append(hits / len(labeled))
        out[name] = (float(np.mean(accs)), float(np.std(accs)))
    if not out:
        raise EvaluationError("no aspect had gold labels for the lexicon baseline")
    return out


# ---------------------------------------------------------------------------
# Metrics report

@dataclass(frozen=True)
class MetricRow:
    aspect: str
    method: str
    split: str
    mean: float
    std: float


def write_metrics(rows: list[MetricRow], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in rows:
            fh.write(json.dumps({"aspect": r.aspect, "method": r.method,
                                 "split": r.split, "mean": r.mean, "std": r.std}) + "\n")


def read_metrics(path) -> list[MetricRow]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                d = json.loads(line)
                rows.append(MetricRow(d["aspect"], d["method"], d["split"],
                                      float(d["mean"]), float(d["std"])))
    return rows
