"""The two classifiers: document-polarity posterior and opinion-word likelihood.

Both are plain softmax models with explicit numpy parameters. The polarity
posterior scores a document feature vector against one weight row per
class; the opinion-word model scores an opinion embedding against one
context vector per class, gated by an indicator that the paired target
word belongs to the aspect's target set.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .corpus import Vocab


class ModelError(Exception):
    pass


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    """Max-shifted softmax, stable for any finite logits."""
    z = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise ModelError("non-finite logits")
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def log_softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise ModelError("non-finite logits")
    z = z - z.max(axis=axis, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=axis, keepdims=True))


def entropy(q: np.ndarray) -> float:
    """Shannon entropy in nats, with 0 log 0 taken as 0."""
    q = np.asarray(q, dtype=np.float64)
    nz = q[q > 0]
    return float(-(nz * np.log(nz)).sum())


def is_distribution(q: np.ndarray, tol: float = 1e-9) -> bool:
    q = np.asarray(q)
    return bool(np.all(q >= 0) and abs(float(q.sum()) - 1.0) <= tol)


@dataclass
class SentimentModel:
    """Polarity classifier q(C|x): softmax over W @ x (one row per class)."""

    W: np.ndarray  # (num_classes, feature_dim)

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        if self.W.ndim != 2 or self.W.shape[0] < 2:
            raise ModelError("W must be (num_classes >= 2, feature_dim)")
        if not np.all(np.isfinite(self.W)):
            raise ModelError("W has non-finite entries")

    @property
    def num_classes(self) -> int:
        return self.W.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.W.shape[1]


@dataclass
class OpinionModel:
    """Opinion-word classifier p(w_o|c,w_t) over an aspect-local opinion vocab.

    A holds one context vector per class, O one embedding row per opinion
    word. target_sets maps aspect id to the set of target-word strings
    whose pairs the model scores (the indicator in the scoring function).
    """

    A: np.ndarray            # (num_classes, embed_dim)
    O: np.ndarray            # (opinion_vocab_size, embed_dim)
    opinion_vocab: Vocab
    target_sets: dict[int, frozenset[str]] = field(default_factory=dict)

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=np.float64)
        self.O = np.asarray(self.O, dtype=np.float64)
        if self.A.ndim != 2 or self.O.ndim != 2 or self.A.shape[1] != self.O.shape[1]:
            raise ModelError("A and O must share the embedding dimension")
        if self.O.shape[0] != len(self.opinion_vocab):
            raise ModelError("O must have one row per opinion-vocab word")

    @property
    def num_classes(self) -> int:
        return self.A.shape[0]

    @property
    def embed_dim(self) -> int:
        return self.A.shape[1]

    def in_target_set(self, target: str, aspect_id: int) -> bool:
        return target in self.target_sets.get(aspect_id, frozenset())


def posterior(model: SentimentModel, x: np.ndarray) -> np.ndarray:
    """q(C|x) for a single feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.feature_dim,):
        raise ModelError(f"feature vector has dim {x.shape}, expected ({model.feature_dim},)")
    if not np.all(np.isfinite(x)):
        raise ModelError("non-finite feature vector")
    return softmax(model.W @ x)


def posterior_batch(model: SentimentModel, X: np.ndarray) -> np.ndarray:
    """q(C|x) rows for a (n, feature_dim) matrix."""
    X = np.asarray(X, dtype=np.float64)
    if not np.all(np.isfinite(X)):
        raise ModelError("non-finite feature matrix")
    return softmax(X @ model.W.T, axis=-1)


def phi(model: OpinionModel, opinion_id: int, target: str, c: int, aspect_id: int) -> float:
    """Scoring function: indicator(target in aspect's set) * <a_c, w_o>."""
    if not model.in_target_set(target, aspect_id):
        return 0.0
    return float(model.A[c] @ model.O[opinion_id])


def opinion_softmax(model: OpinionModel, target: str, c: int, aspect_id: int) -> np.ndarray:
    """p(.|c, target) over the opinion vocabulary."""
    if len(model.opinion_vocab) < 1:
        raise ModelError("empty opinion vocabulary")
    gate = 1.0 if model.in_target_set(target, aspect_id) else 0.0
    return softmax(gate * (model.O @ model.A[c]))


def opinion_log_probs(model: OpinionModel) -> np.ndarray:
    """log p(w|c) matrix (num_classes, vocab) with the indicator taken as 1.

    Valid for every training pair by the target-set invariant; the scoring
    function does not otherwise depend on the target word.
    """
    return log_softmax(model.A @ model.O.T, axis=-1)


def true_posterior(opinion: OpinionModel, opinion_id: int, target: str,
                   aspect_id: int, prior: np.ndarray) -> np.ndarray:
    """Exact Bayes posterior p(c|target, opinion) by enumeration over classes."""
    prior = np.asarray(prior, dtype=np.float64)
    if prior.shape != (opinion.num_classes,):
        raise ModelError("prior has wrong number of classes")
    lik = np.array([opinion_softmax(opinion, target, c, aspect_id)[opinion_id]
                    for c in range(opinion.num_classes)])
    joint = lik * prior
    z = joint.sum()
    if z <= 0:
        raise ModelError("degenerate parameters: joint probability is zero everywhere")
    return joint / z


def init_models(num_classes: int, feature_dim: int, opinion_vocab: Vocab,
                target_sets: dict[int, frozenset[str]], rng: np.random.Generator,
                embed_dim: int = 50, init_embeddings: np.ndarray | None = None,
                init_std: float = 0.01) -> tuple[SentimentModel, OpinionModel]:
    """Gaussian init for W and A; O copies loaded embeddings when given."""
    W = rng.normal(0.0, init_std, size=(num_classes, feature_dim))
    if init_embeddings is not None:
        O = np.array(init_embeddings, dtype=np.float64)
        if O.shape[0] != len(opinion_vocab):
            raise ModelError("init embeddings must cover the opinion vocabulary")
        embed_dim = O.shape[1]
    else:
        O = rng.normal(0.0, init_std, size=(len(opinion_vocab), embed_dim))
    A = rng.normal(0.0, init_std, size=(num_classes, embed_dim))
    return SentimentModel(W=W), OpinionModel(A=A, O=O, opinion_vocab=opinion_vocab,
                                             target_sets=target_sets)


# ---------------------------------------------------------------------------
# Checkpoints: one aspect entry per trained classifier, JSON on disk.

CHECKPOINT_FORMAT = "pairsent-checkpoint-v1"


@dataclass
class AspectCheckpoint:
    sentiment: SentimentModel
    opinion: OpinionModel
    prior_logits: np.ndarray | None  # None = uniform prior


@dataclass
class Checkpoint:
    num_classes: int
    feature_vocab: Vocab
    aspects: dict[str, AspectCheckpoint]
    config: dict
    split_seed: int

    def aspect_names(self) -> list[str]:
        return list(self.aspects)


def _vocab_payload(vocab: Vocab) -> dict:
    return {"words": vocab.words,
            "frequency": [vocab.frequency[w] for w in vocab.words],
            "sha256": vocab.sha256()}


def _vocab_from_payload(payload: dict, what: str) -> Vocab:
    vocab = Vocab.from_words(payload["words"],
                             dict(zip(payload["words"], payload["frequency"])))
    if vocab.sha256() != payload["sha256"]:
        raise ModelError(f"{what} vocabulary hash mismatch: checkpoint is stale or corrupt")
    return vocab


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    payload = {
        "format": CHECKPOINT_FORMAT,
        "num_classes": ckpt.num_classes,
        "feature_vocab": _vocab_payload(ckpt.feature_vocab),
        "config": ckpt.config,
        "split_seed": ckpt.split_seed,
        "aspects": {},
    }
    for name, entry in ckpt.aspects.items():
        payload["aspects"][name] = {
            "W": entry.sentiment.W.tolist(),
            "A": entry.opinion.A.tolist(),
            "O": entry.opinion.O.tolist(),
            "opinion_vocab": _vocab_payload(entry.opinion.opinion_vocab),
            "target_sets": {str(k): sorted(v) for k, v in entry.opinion.target_sets.items()},
            "prior_logits": None if entry.prior_logits is None else entry.prior_logits.tolist(),
        }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_checkpoint(path) -> Checkpoint:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ModelError(f"not a {CHECKPOINT_FORMAT} file: {path}")
    feature_vocab = _vocab_from_payload(payload["feature_vocab"], "feature")
    aspects = {}
    for name, entry in payload["aspects"].items():
        opinion_vocab = _vocab_from_payload(entry["opinion_vocab"], f"aspect {name} opinion")
        A = np.array(entry["A"], dtype=np.float64)
        # an aspect with no pairs has an empty O; JSON drops its column count
        O = np.array(entry["O"], dtype=np.float64).reshape(-1, A.shape[1])
        opinion = OpinionModel(
            A=A, O=O, opinion_vocab=opinion_vocab,
            target_sets={int(k): frozenset(v) for k, v in entry["target_sets"].items()})
        prior = None if entry["prior_logits"] is None else np.array(entry["prior_logits"])
        aspects[name] = AspectCheckpoint(sentiment=SentimentModel(W=np.array(entry["W"])),
                                         opinion=opinion, prior_logits=prior)
    return Checkpoint(num_classes=payload["num_classes"], feature_vocab=feature_vocab,
                      aspects=aspects, config=payload["config"],
                      split_seed=payload["split_seed"])
