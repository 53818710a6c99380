"""Training objectives and the optimization loop.

The trainer maximizes a lower bound on the log-likelihood of opinion words
given target words. Every pair contributes an expectation of the opinion
log-score under the polarity posterior plus a weighted entropy term; the
exact bound sums the opinion softmax over the whole opinion vocabulary,
while the sampled variant replaces it with a sigmoid score against drawn
negatives. An optional batch regularizer pulls the posteriors of documents
with similar opinion words together and pushes dissimilar ones apart.

All gradients are computed analytically in closed form and verified by
central finite differences (see gradient_check).
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit

from .corpus import Document, EmbeddingTable, Vocab, build_vocab, feature_matrix
from .extraction import WordPair
from .model import (AspectCheckpoint, OpinionModel, SentimentModel, init_models,
                    log_softmax, softmax)

log = logging.getLogger(__name__)

EXACT_L1 = "EXACT_L1"
EXACT_L2 = "EXACT_L2"
NEG_SAMPLING_L3 = "NEG_SAMPLING_L3"
OBJECTIVES = (EXACT_L1, EXACT_L2, NEG_SAMPLING_L3)

EXACT_EXPECTATION = "EXACT_EXPECTATION"
LIKELIHOOD_RATIO = "LIKELIHOOD_RATIO"

NEGATIVE_POWER = 0.75
PAIR_POWER = -0.25

# Multiplies the entropy term's analytic gradient only. The verification
# suite flips it to prove the finite-difference checks can catch a planted
# sign error; it must stay 1.0 everywhere else.
ENTROPY_GRAD_SIGN = 1.0


class TrainingError(Exception):
    pass


@dataclass
class TrainConfig:
    alpha: float = 0.1              # entropy weight (exact objectives default to 1.0 at the op level)
    beta: float = 0.0               # regularizer weight
    gamma: float = 0.8              # similarity threshold in [0, 1]
    negatives: int = 10
    pairs_per_doc: int = 5
    batch_size: int = 64
    epochs: int = 20
    seed: int = 42
    weight_decay: float = 1e-3
    dropout: float = 0.3
    objective: str = NEG_SAMPLING_L3
    grad_estimator: str = EXACT_EXPECTATION
    estimator_samples: int = 1      # K for the likelihood-ratio estimator
    prior: str = "uniform"          # "uniform" | "learned"
    optimizer: str = "adadelta"     # "adadelta" | "sgd"
    learning_rate: float = 0.1      # sgd only
    num_classes: int = 2
    embed_dim: int = 50             # used only when no embedding file is given
    min_count: int = 1

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be >= 0")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.negatives < 1 or self.pairs_per_doc < 1 or self.estimator_samples < 1:
            raise ValueError("negatives, pairs_per_doc and estimator_samples must be >= 1")
        if self.batch_size < 1 or self.epochs < 1 or self.min_count < 1:
            raise ValueError("batch_size, epochs and min_count must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")
        if self.objective not in OBJECTIVES:
            raise ValueError(f"unknown objective {self.objective!r}")
        if self.grad_estimator not in (EXACT_EXPECTATION, LIKELIHOOD_RATIO):
            raise ValueError(f"unknown grad estimator {self.grad_estimator!r}")
        if self.prior not in ("uniform", "learned"):
            raise ValueError(f"unknown prior {self.prior!r}")
        if self.optimizer not in ("adadelta", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")


@dataclass
class Batch:
    """One optimizer step's worth of documents and sampled pairs.

    X rows are the (possibly dropout-masked) feature vectors of the batch
    documents; pair_doc maps each sampled pair to its row. negatives is
    None for exact objectives. sim is the thresholded cosine-similarity
    matrix between the documents' designated opinion words (zero diagonal),
    or None when the regularizer is off.
    """

    X: np.ndarray
    pair_doc: np.ndarray
    pair_opinion: np.ndarray
    negatives: np.ndarray | None = None
    sim: np.ndarray | None = None

    def __post_init__(self):
        self.pair_doc = np.asarray(self.pair_doc, dtype=np.intp)
        self.pair_opinion = np.asarray(self.pair_opinion, dtype=np.intp)
        if self.negatives is not None:
            self.negatives = np.asarray(self.negatives, dtype=np.intp)

    @property
    def num_docs(self) -> int:
        return self.X.shape[0]

    @property
    def num_pairs(self) -> int:
        return self.pair_doc.shape[0]


# ---------------------------------------------------------------------------
# Samplers

def negative_weights(counts: np.ndarray, power: float = NEGATIVE_POWER) -> np.ndarray:
    return np.asarray(counts, dtype=np.float64) ** power


def sample_negatives(rng: np.random.Generator, weights: np.ndarray,
                     positive: int, n: int) -> np.ndarray:
    """Draw n negatives from the unigram^0.75 distribution minus the positive."""
    if weights.shape[0] < 2:
        raise TrainingError("opinion vocabulary of size 1: no negatives available")
    w = weights.astype(np.float64).copy()
    w[positive] = 0.0
    total = w.sum()
    if total <= 0:
        raise TrainingError("negative-sampling weights sum to zero")
    return rng.choice(w.shape[0], size=n, p=w / total)


def pair_weights(opinion_ids: np.ndarray, corpus_counts: np.ndarray,
                 power: float = PAIR_POWER) -> np.ndarray:
    """Per-pair selection weights: opinion-word corpus frequency ** power."""
    w = corpus_counts[np.asarray(opinion_ids, dtype=np.intp)].astype(np.float64) ** power
    return w / w.sum()


# ---------------------------------------------------------------------------
# Objective value and analytic gradients

def prior_log_vector(prior_logits: np.ndarray | None, num_classes: int,
                     objective: str) -> np.ndarray | None:
    """Per-class log prior added to the pair score, or None when dropped (L2)."""
    if objective == EXACT_L2:
        return None
    if prior_logits is None:
        return np.full(num_classes, -math.log(num_classes))
    return log_softmax(np.asarray(prior_logits, dtype=np.float64))


def _entropy_rows(q: np.ndarray) -> np.ndarray:
    return -np.where(q > 0, q * np.log(np.where(q > 0, q, 1.0)), 0.0).sum(axis=-1)


def _log_sigmoid(x: np.ndarray) -> np.ndarray:
    return -np.logaddexp(0.0, -x)


def _pair_scores(A: np.ndarray, O: np.ndarray, batch: Batch):
    """Per-pair per-class opinion score s (m, C) plus backprop context."""
    if batch.negatives is None:
        logP = log_softmax(A @ O.T, axis=-1)           # (C, V)
        return logP[:, batch.pair_opinion].T, ("exact", logP)
    phi_pos = O[batch.pair_opinion] @ A.T              # (m, C)
    phi_neg = np.einsum("mne,ce->mnc", O[batch.negatives], A)  # (m, N, C)
    s = _log_sigmoid(phi_pos) + _log_sigmoid(-phi_neg).sum(axis=1)
    return s, ("sampled", phi_pos, phi_neg)


def objective_terms(W: np.ndarray, A: np.ndarray, O: np.ndarray,
                    prior_logits: np.ndarray | None, batch: Batch, *,
                    objective: str | None, alpha: float, beta: float,
                    weight_decay: float = 0.0,
                    want_grads: bool = False):
    """Evaluate the batch objective and, optionally, its analytic gradients.

    Returns (total, terms) or (total, terms, grads). terms carries the data
    and regularizer contributions separately. objective=None skips the data
    term entirely (regularizer-only runs). The total is
    data + beta * reg - weight_decay * (|W|^2 + |A|^2).
    """
    num_classes = W.shape[0]
    with np.errstate(over="ignore"):
        Z = batch.X @ W.T                              # (b, C)
    if not np.all(np.isfinite(Z)):
        raise TrainingError("non-finite class logits; parameters or features overflowed")
    q = softmax(Z, axis=-1)
    logq = np.log(np.maximum(q, 1e-300))

    grads = {"W": np.zeros_like(W), "A": np.zeros_like(A), "O": np.zeros_like(O)}
    if prior_logits is not None:
        grads["u"] = np.zeros_like(prior_logits, dtype=np.float64)
    dZ = np.zeros_like(q)

    data = 0.0
    if objective is not None and batch.num_pairs > 0:
        s, ctx = _pair_scores(A, O, batch)
        plog = prior_log_vector(prior_logits, num_classes, objective)
        r = s if plog is None else s + plog[None, :]
        qp = q[batch.pair_doc]                          # (m, C)
        logqp = logq[batch.pair_doc]
        H = _entropy_rows(qp)
        data = float((qp * r).sum() + alpha * H.sum())

        if want_grads:
            # d/dz of sum_c q_c (r_c - alpha log q_c): the -alpha log q part
            # contributes through both q and log q; the log q path cancels.
            t = r - ENTROPY_GRAD_SIGN * alpha * logqp
            dz_pair = qp * (t - (qp * t).sum(axis=1, keepdims=True))
            np.add.at(dZ, batch.pair_doc, dz_pair)
            if ctx[0] == "exact":
                logP = ctx[1]
                P = np.exp(logP)                        # (C, V)
                qc_tot = qp.sum(axis=0)                 # (C,)
                grads["A"] += qp.T @ O[batch.pair_opinion] - (P @ O) * qc_tot[:, None]
                np.add.at(grads["O"], batch.pair_opinion, qp @ A)
                grads["O"] -= (P * qc_tot[:, None]).T @ A
            else:
                _, phi_pos, phi_neg = ctx
                sig_pos = expit(phi_pos)                # (m, C)
                sig_neg = expit(phi_neg)                # (m, N, C)
                wpos = qp * (1.0 - sig_pos)
                grads["A"] += wpos.T @ O[batch.pair_opinion]
                wneg = qp[:, None, :] * sig_neg          # (m, N, C)
                grads["A"] -= np.einsum("mnc,mne->ce", wneg, O[batch.negatives])
                np.add.at(grads["O"], batch.pair_opinion, wpos @ A)
                np.add.at(grads["O"], batch.negatives.reshape(-1),
                          -np.einsum("mnc,ce->mne", wneg, A).reshape(-1, A.shape[1]))
            if prior_logits is not None and plog is not None:
                p = np.exp(plog)
                grads["u"] += qp.sum(axis=0) - batch.num_pairs * p

    reg = 0.0
    if batch.sim is not None and beta != 0.0:
        S = batch.sim
        diff = q[:, None, :] - q[None, :, :]            # (b, b, C)
        d2 = (diff * diff).sum(axis=-1)
        reg = float(-(d2 * S).sum())
        if want_grads:
            srow = S.sum(axis=1)
            gq = -4.0 * beta * (q * srow[:, None] - S @ q)
            dZ += q * (gq - (q * gq).sum(axis=1, keepdims=True))

    if want_grads:
        grads["W"] += dZ.T @ batch.X
        if weight_decay:
            grads["W"] -= 2.0 * weight_decay * W
            grads["A"] -= 2.0 * weight_decay * A

    decay = weight_decay * (float((W * W).sum()) + float((A * A).sum()))
    total = data + beta * reg - decay
    terms = {"data": data, "reg": reg, "decay": decay}
    for name, value in terms.items():
        if not math.isfinite(value):
            raise TrainingError(f"objective term {name!r} is non-finite")
    if want_grads:
        return total, terms, grads
    return total, terms


def elbo_exact(batch: Batch, sentiment: SentimentModel, opinion: OpinionModel,
               prior_logits: np.ndarray | None = None, alpha: float = 1.0,
               uniform_prior_term: bool = True) -> float:
    """Exact bound value for a batch: expectation of opinion log-likelihood
    (plus log prior unless uniform_prior_term is False) plus alpha-weighted
    per-pair entropy."""
    if batch.num_pairs == 0:
        return 0.0
    objective = EXACT_L1 if uniform_prior_term or prior_logits is not None else EXACT_L2
    total, _ = objective_terms(sentiment.W, opinion.A, opinion.O, prior_logits,
                               batch, objective=objective, alpha=alpha, beta=0.0)
    return total


def elbo_negative_sampling(batch: Batch, sentiment: SentimentModel,
                           opinion: OpinionModel, prior_logits: np.ndarray | None,
                           cfg: TrainConfig, rng: np.random.Generator) -> float:
    """Sampled bound: sigmoid score of each pair against cfg.negatives draws
    from the unigram^0.75 opinion distribution (positive excluded)."""
    if len(opinion.opinion_vocab) < 2:
        raise TrainingError("opinion vocabulary of size 1: no negatives available")
    counts = np.array([opinion.opinion_vocab.frequency[w]
                       for w in opinion.opinion_vocab.words], dtype=np.float64)
    weights = negative_weights(counts)
    negs = np.stack([sample_negatives(rng, weights, int(o), cfg.negatives)
                     for o in batch.pair_opinion])
    sampled = replace_negatives(batch, negs)
    total, _ = objective_terms(sentiment.W, opinion.A, opinion.O, prior_logits,
                               sampled, objective=NEG_SAMPLING_L3,
                               alpha=cfg.alpha, beta=0.0)
    return total


def replace_negatives(batch: Batch, negatives: np.ndarray | None) -> Batch:
    return Batch(X=batch.X, pair_doc=batch.pair_doc, pair_opinion=batch.pair_opinion,
                 negatives=negatives, sim=batch.sim)


def brute_force_log_likelihood(batch: Batch, opinion: OpinionModel,
                               prior_logits: np.ndarray | None) -> float:
    """Independent marginal log p(w_o | w_t) = log sum_c p(w_o|c,w_t) p(c),
    enumerated class by class."""
    num_classes = opinion.num_classes
    plog = prior_log_vector(prior_logits, num_classes, EXACT_L1)
    logP = log_softmax(opinion.A @ opinion.O.T, axis=-1)
    total = 0.0
    for o in batch.pair_opinion:
        total += float(np.logaddexp.reduce(logP[:, o] + plog))
    return total


def score_function_grad(batch: Batch, sentiment: SentimentModel,
                        opinion: OpinionModel, prior_logits: np.ndarray | None,
                        K: int, rng: np.random.Generator,
                        alpha: float = 1.0) -> np.ndarray:
    """Likelihood-ratio estimate of the bound's gradient wrt W.

    For each pair, classes are sampled from the posterior and the learning
    signal log p(w_o|c,w_t) + log p(c|w_t) - alpha log q(c|x) multiplies the
    score function gradient of log q, averaged over K draws.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    W = sentiment.W
    q = softmax(batch.X @ W.T, axis=-1)
    s, _ = _pair_scores(opinion.A, opinion.O, batch)
    plog = prior_log_vector(prior_logits, W.shape[0], EXACT_L1)
    r = s + plog[None, :]
    dW = np.zeros_like(W)
    for m in range(batch.num_pairs):
        i = batch.pair_doc[m]
        qm = q[i]
        cs = rng.choice(W.shape[0], size=K, p=qm)
        signal = r[m, cs] - alpha * np.log(qm[cs])
        # sum_j A_j (onehot(c_j) - q) averaged, then outer with x
        coeff = np.zeros(W.shape[0])
        np.add.at(coeff, cs, signal)
        coeff -= signal.sum() * qm
        dW += np.outer(coeff / K, batch.X[i])
    return dW


def exact_expectation_grad(batch: Batch, sentiment: SentimentModel,
                           opinion: OpinionModel, prior_logits: np.ndarray | None,
                           alpha: float = 1.0) -> np.ndarray:
    """The expectation the likelihood-ratio estimator targets, summed exactly."""
    objective = NEG_SAMPLING_L3 if batch.negatives is not None else EXACT_L1
    _, _, grads = objective_terms(sentiment.W, opinion.A, opinion.O, prior_logits,
                                  batch, objective=objective, alpha=alpha,
                                  beta=0.0, want_grads=True)
    return grads["W"]


# ---------------------------------------------------------------------------
# Opinion-word similarity for the regularizer

def similarity_score(w_i: str, w_j: str, emb_vocab: Vocab, emb: EmbeddingTable,
                     gamma: float) -> float:
    """Thresholded cosine: the raw cosine when |cos| >= gamma, else 0.

    Out-of-vocabulary or zero-norm words score 0 (the pair is skipped).
    """
    i, j = emb_vocab.get(w_i), emb_vocab.get(w_j)
    if i is None or j is None:
        return 0.0
    u, v = emb.rows[i], emb.rows[j]
    nu, nv = float(np.linalg.norm(u)), float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        log.warning("zero-norm embedding for %r or %r; similarity 0", w_i, w_j)
        return 0.0
    z = float(np.dot(u, v) / (nu * nv))
    return z if abs(z) >= gamma else 0.0


def pairwise_similarity(vectors: np.ndarray, valid: np.ndarray,
                        gamma: float) -> np.ndarray:
    """Thresholded cosine matrix over designated opinion-word vectors.

    valid marks rows with a usable embedding; anything touching an invalid
    row scores 0, as does the diagonal.
    """
    n = vectors.shape[0]
    norms = np.linalg.norm(vectors, axis=1)
    ok = valid & (norms > 0)
    safe = np.where(norms > 0, norms, 1.0)
    unit = vectors / safe[:, None]
    S = unit @ unit.T
    S[np.abs(S) < gamma] = 0.0
    S[~ok, :] = 0.0
    S[:, ~ok] = 0.0
    np.fill_diagonal(S, 0.0)
    return S


def regularizer_value(posteriors: np.ndarray, sim: np.ndarray) -> float:
    """sum_{i != j} -|q_i - q_j|^2 * sim_ij (the diagonal of sim is zero)."""
    diff = posteriors[:, None, :] - posteriors[None, :, :]
    return float(-((diff * diff).sum(axis=-1) * sim).sum())


# ---------------------------------------------------------------------------
# Gradient checking

def numerical_gradient(f, param: np.ndarray, epsilon: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function over every coordinate."""
    grad = np.zeros_like(param)
    it = np.nditer(param, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        orig = param[idx]
        param[idx] = orig + epsilon
        up = f()
        param[idx] = orig - epsilon
        down = f()
        param[idx] = orig
        grad[idx] = (up - down) / (2.0 * epsilon)
        it.iternext()
    return grad


def gradient_check(sentiment: SentimentModel, opinion: OpinionModel,
                   prior_logits: np.ndarray | None, batch: Batch, *,
                   objective: str | None, alpha: float = 1.0, beta: float = 0.0,
                   weight_decay: float = 0.0, epsilon: float = 1e-5) -> float:
    """Max relative error between analytic and finite-difference gradients.

    Sampling is frozen: the batch's negatives are fixed inputs, so the
    sampled objective is an ordinary deterministic function here.
    """
    W, A, O = sentiment.W, opinion.A, opinion.O
    kwargs = dict(objective=objective, alpha=alpha, beta=beta, weight_decay=weight_decay)

    def value():
        total, _ = objective_terms(W, A, O, prior_logits, batch, **kwargs)
        return total

    _, _, grads = objective_terms(W, A, O, prior_logits, batch, want_grads=True, **kwargs)
    worst = 0.0
    params = {"W": W, "A": A, "O": O}
    if prior_logits is not None:
        params["u"] = prior_logits
    for name, param in params.items():
        numeric = numerical_gradient(value, param, epsilon)
        denom = np.maximum(1.0, np.abs(numeric))
        worst = max(worst, float((np.abs(grads[name] - numeric) / denom).max()))
    return worst


# ---------------------------------------------------------------------------
# Optimizers

class Adadelta:
    """Per-coordinate adaptive steps from running squared gradients and
    squared updates (decay rho, stabilizer eps). Ascent convention."""

    def __init__(self, params: dict[str, np.ndarray], rho: float = 0.95,
                 eps: float = 1e-6):
        self.rho = rho
        self.eps = eps
        self.sq_grad = {k: np.zeros_like(v) for k, v in params.items()}
        self.sq_step = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        for k, g in grads.items():
            self.sq_grad[k] = self.rho * self.sq_grad[k] + (1.0 - self.rho) * g * g
            dx = np.sqrt((self.sq_step[k] + self.eps) / (self.sq_grad[k] + self.eps)) * g
            self.sq_step[k] = self.rho * self.sq_step[k] + (1.0 - self.rho) * dx * dx
            params[k] += dx


class Sgd:
    """Fixed-rate ascent, for gradient-check debugging."""

    def __init__(self, params: dict[str, np.ndarray], learning_rate: float):
        self.lr = learning_rate

    def step(self, params, grads) -> None:
        for k, g in grads.items():
            params[k] += self.lr * g


def make_optimizer(cfg: TrainConfig, params: dict[str, np.ndarray]):
    if cfg.optimizer == "adadelta":
        return Adadelta(params)
    if cfg.optimizer == "sgd":
        return Sgd(params, cfg.learning_rate)
    raise TrainingError(f"unknown optimizer {cfg.optimizer!r}")


# ---------------------------------------------------------------------------
# Per-aspect training data

@dataclass
class AspectData:
    """Everything one aspect's trainer needs, frozen before the loop."""

    aspect_id: int
    name: str
    doc_rows: np.ndarray              # indices into the corpus feature matrix
    doc_pair_opinions: list[np.ndarray]   # per doc: opinion ids of its pairs
    doc_pair_weights: list[np.ndarray]    # per doc: normalized freq^-0.25 weights
    opinion_vocab: Vocab
    opinion_counts: np.ndarray
    target_set: frozenset[str]
    opinion_vectors: np.ndarray | None    # external embeddings per opinion word
    opinion_vector_valid: np.ndarray | None


def build_aspect_data(aspect_id: int, name: str, pairs: list[WordPair],
                      doc_index: dict[str, int],
                      emb: tuple[Vocab, EmbeddingTable] | None) -> AspectData | None:
    """Group one aspect's pairs by document and precompute sampler weights."""
    mine = [p for p in pairs if p.aspect_id == aspect_id and p.doc_id in doc_index]
    if not mine:
        return None
    counts = Counter(p.opinion for p in mine)
    ordered = sorted(counts.items(), key=lambda wc: (-wc[1], wc[0]))
    vocab = Vocab.from_words([w for w, _ in ordered], dict(ordered))
    count_arr = np.array([counts[w] for w in vocab.words], dtype=np.float64)

    by_doc: dict[int, list[int]] = {}
    for p in mine:
        by_doc.setdefault(doc_index[p.doc_id], []).append(vocab.index[p.opinion])
    rows = np.array(sorted(by_doc), dtype=np.intp)
    doc_ops = [np.array(by_doc[r], dtype=np.intp) for r in rows]
    doc_w = [pair_weights(ops, count_arr) for ops in doc_ops]

    vectors = valid = None
    if emb is not None:
        emb_vocab, table = emb
        vectors = np.zeros((len(vocab), table.dimension))
        valid = np.zeros(len(vocab), dtype=bool)
        for i, w in enumerate(vocab.words):
            j = emb_vocab.get(w)
            if j is not None:
                vectors[i] = table.rows[j]
                valid[i] = True

    return AspectData(aspect_id=aspect_id, name=name, doc_rows=rows,
                      doc_pair_opinions=doc_ops, doc_pair_weights=doc_w,
                      opinion_vocab=vocab, opinion_counts=count_arr,
                      target_set=frozenset(p.target for p in mine),
                      opinion_vectors=vectors, opinion_vector_valid=valid)


def assemble_batch(data: AspectData, X: np.ndarray, members: np.ndarray,
                   cfg: TrainConfig, rng: np.random.Generator,
                   training: bool = True) -> Batch:
    """Sample pairs (and negatives) for the given member docs of one aspect.

    members indexes into data.doc_rows. Randomness is consumed in a fixed
    order: pair draws per doc, then negatives per pair, then the dropout
    mask, so runs replay exactly from the generator state.
    """
    pair_doc, pair_opinion, first_opinion = [], [], []
    for b, mi in enumerate(members):
        ops, w = data.doc_pair_opinions[mi], data.doc_pair_weights[mi]
        picks = rng.choice(ops.shape[0], size=cfg.pairs_per_doc, p=w)
        chosen = ops[picks]
        first_opinion.append(chosen[0])
        pair_doc.extend([b] * cfg.pairs_per_doc)
        pair_opinion.extend(chosen.tolist())
    pair_doc = np.array(pair_doc, dtype=np.intp)
    pair_opinion = np.array(pair_opinion, dtype=np.intp)

    negatives = None
    if cfg.objective == NEG_SAMPLING_L3:
        weights = negative_weights(data.opinion_counts)
        negatives = np.stack([sample_negatives(rng, weights, int(o), cfg.negatives)
                              for o in pair_opinion])

    Xb = X[data.doc_rows[members]]
    if training and cfg.dropout > 0.0:
        mask = (rng.random(Xb.shape) >= cfg.dropout) / (1.0 - cfg.dropout)
        Xb = Xb * mask

    sim = None
    if cfg.beta > 0.0 and data.opinion_vectors is not None:
        ids = np.array(first_opinion, dtype=np.intp)
        sim = pairwise_similarity(data.opinion_vectors[ids],
                                  data.opinion_vector_valid[ids], cfg.gamma)
    return Batch(X=Xb, pair_doc=pair_doc, pair_opinion=pair_opinion,
                 negatives=negatives, sim=sim)


# ---------------------------------------------------------------------------
# Training loop

@dataclass
class HistoryRow:
    epoch: int
    objective: float
    reg_term: float
    dev_accuracy: float


@dataclass
class TrainResult:
    feature_vocab: Vocab
    num_classes: int
    aspects: dict[str, AspectCheckpoint]
    history: list[HistoryRow]
    per_aspect_history: dict[str, list[HistoryRow]]
    config: TrainConfig


def train_aspect(data: AspectData, X: np.ndarray, cfg: TrainConfig,
                 rng: np.random.Generator,
                 dev: tuple[np.ndarray, np.ndarray] | None = None,
                 ) -> tuple[AspectCheckpoint, list[HistoryRow]]:
    """Mini-batch gradient ascent on one aspect's objective.

    dev, when given, is (dev feature matrix, dev gold labels) for the
    per-epoch accuracy column.
    """
    from .evaluation import accuracy_with_assignment

    if cfg.objective == NEG_SAMPLING_L3 and len(data.opinion_vocab) < 2:
        raise TrainingError(
            f"aspect {data.name!r}: opinion vocabulary of size "
            f"{len(data.opinion_vocab)} cannot support negative sampling")

    init_O = None
    if data.opinion_vectors is not None and data.opinion_vector_valid.any():
        # per-word: external embedding row when available, Gaussian otherwise
        fallback = rng.normal(0.0, 0.01, size=data.opinion_vectors.shape)
        init_O = np.where(data.opinion_vector_valid[:, None],
                          data.opinion_vectors, fallback)
    sentiment, opinion = init_models(
        cfg.num_classes, X.shape[1], data.opinion_vocab,
        {data.aspect_id: data.target_set}, rng, embed_dim=cfg.embed_dim,
        init_embeddings=init_O)
    prior_logits = np.zeros(cfg.num_classes) if cfg.prior == "learned" else None

    params = {"W": sentiment.W, "A": opinion.A, "O": opinion.O}
    if prior_logits is not None:
        params["u"] = prior_logits
    opt = make_optimizer(cfg, params)

    n = data.doc_rows.shape[0]
    history: list[HistoryRow] = []
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        epoch_obj = epoch_reg = 0.0
        for start in range(0, n, cfg.batch_size):
            members = order[start:start + cfg.batch_size]
            batch = assemble_batch(data, X, members, cfg, rng)
            if cfg.grad_estimator == LIKELIHOOD_RATIO:
                total, terms, grads = _likelihood_ratio_step(
                    params, prior_logits, batch, cfg, rng)
            else:
                total, terms, grads = objective_terms(
                    params["W"], params["A"], params["O"], params.get("u"),
                    batch, objective=cfg.objective, alpha=cfg.alpha,
                    beta=cfg.beta, weight_decay=cfg.weight_decay, want_grads=True)
            if not math.isfinite(total):
                raise TrainingError(f"aspect {data.name!r}: non-finite objective")
            opt.step(params, grads)
            epoch_obj += total
            epoch_reg += terms["reg"]
        dev_acc = float("nan")
        if dev is not None:
            dev_q = softmax(dev[0] @ params["W"].T, axis=-1)
            dev_acc = accuracy_with_assignment(np.argmax(dev_q, axis=1), dev[1],
                                               cfg.num_classes)
        history.append(HistoryRow(epoch=epoch, objective=epoch_obj,
                                  reg_term=epoch_reg, dev_accuracy=dev_acc))

    ckpt = AspectCheckpoint(sentiment=SentimentModel(W=params["W"]),
                            opinion=OpinionModel(A=params["A"], O=params["O"],
                                                 opinion_vocab=data.opinion_vocab,
                                                 target_sets={data.aspect_id:
                                                              data.target_set}),
                            prior_logits=params.get("u"))
    return ckpt, history


def _likelihood_ratio_step(params, prior_logits, batch: Batch, cfg: TrainConfig,
                           rng: np.random.Generator):
    """Monte-Carlo gradients: score-function for W, sampled-class averages
    for the opinion parameters. The reported value stays the exact one."""
    W, A, O = params["W"], params["A"], params["O"]
    total, terms = objective_terms(W, A, O, params.get("u"), batch,
                                   objective=cfg.objective, alpha=cfg.alpha,
                                   beta=cfg.beta, weight_decay=cfg.weight_decay)
    sentiment = SentimentModel(W=W)
    q = softmax(batch.X @ W.T, axis=-1)
    s, ctx = _pair_scores(A, O, batch)
    plog = prior_log_vector(params.get("u"), W.shape[0], cfg.objective)
    r = s if plog is None else s + plog[None, :]
    K = cfg.estimator_samples

    dW = np.zeros_like(W)
    dA = np.zeros_like(A)
    dO = np.zeros_like(O)
    for m in range(batch.num_pairs):
        i = batch.pair_doc[m]
        qm = q[i]
        cs = rng.choice(W.shape[0], size=K, p=qm)
        signal = r[m, cs] - cfg.alpha * np.log(qm[cs])
        coeff = np.zeros(W.shape[0])
        np.add.at(coeff, cs, signal)
        coeff -= signal.sum() * qm
        dW += np.outer(coeff / K, batch.X[i])
        for c in cs:
            if ctx[0] == "exact":
                logP = ctx[1]
                P = np.exp(logP[c])
                dA[c] += (O[batch.pair_opinion[m]] - P @ O) / K
                dO[batch.pair_opinion[m]] += A[c] / K
                dO -= np.outer(P, A[c]) / K
            else:
                _, phi_pos, phi_neg = ctx
                o = batch.pair_opinion[m]
                dA[c] += (1.0 - expit(phi_pos[m, c])) * O[o] / K
                dO[o] += (1.0 - expit(phi_pos[m, c])) * A[c] / K
                for n_idx, w in enumerate(batch.negatives[m]):
                    sg = expit(phi_neg[m, n_idx, c])
                    dA[c] -= sg * O[w] / K
                    dO[w] -= sg * A[c] / K

    # regularizer and decay stay exact
    _, _, reg_grads = objective_terms(W, A, O, params.get("u"), batch,
                                      objective=None, alpha=cfg.alpha,
                                      beta=cfg.beta, weight_decay=cfg.weight_decay,
                                      want_grads=True)
    grads = {"W": dW + reg_grads["W"], "A": dA + reg_grads["A"], "O": dO + reg_grads["O"]}
    if "u" in params:
        p = np.exp(log_softmax(params["u"]))
        grads["u"] = q[batch.pair_doc].sum(axis=0) - batch.num_pairs * p
    return total, terms, grads


def train(train_docs: list[Document], pairs: list[WordPair], cfg: TrainConfig,
          aspect_names: list[str], dev_docs: list[Document] | None = None,
          emb: tuple[Vocab, EmbeddingTable] | None = None,
          feature_vocab: Vocab | None = None,
          stopwords: frozenset[str] | None = None) -> TrainResult:
    """Train one polarity classifier per aspect that has extracted pairs.

    Documents without pairs for an aspect are excluded from that aspect's
    batches; aspects with no pairs at all get an initialization-only entry
    so evaluation can still run. The merged history sums objectives across
    aspects and averages dev accuracy.
    """
    if not pairs:
        raise TrainingError("no pairs to train from")
    if feature_vocab is None:
        feature_vocab = build_vocab(train_docs, min_count=cfg.min_count,
                                    stopwords=stopwords)
    if len(feature_vocab) == 0:
        raise TrainingError("empty feature vocabulary")
    X = feature_matrix(train_docs, feature_vocab, stopwords)
    doc_index = {d.id: i for i, d in enumerate(train_docs)}
    dev_X = feature_matrix(dev_docs, feature_vocab, stopwords) if dev_docs else None

    seed_seq = np.random.SeedSequence(cfg.seed)
    children = seed_seq.spawn(len(aspect_names))

    aspects: dict[str, AspectCheckpoint] = {}
    per_aspect: dict[str, list[HistoryRow]] = {}
    for aspect_id, name in enumerate(aspect_names):
        rng = np.random.default_rng(children[aspect_id])
        data = build_aspect_data(aspect_id, name, pairs, doc_index, emb)
        if data is None:
            log.warning("aspect %r has no pairs; classifier left at initialization", name)
            sentiment, opinion = init_models(cfg.num_classes, len(feature_vocab),
                                             Vocab.from_words([]), {aspect_id: frozenset()},
                                             rng, embed_dim=cfg.embed_dim)
            aspects[name] = AspectCheckpoint(sentiment=sentiment, opinion=opinion,
                                             prior_logits=None)
            continue
        dev = None
        if dev_docs:
            labels = np.array([d.gold_labels.get(name, -1) for d in dev_docs])
            keep = labels >= 0
            if keep.any():
                dev = (dev_X[keep], labels[keep])
        ckpt, history = train_aspect(data, X, cfg, rng, dev)
        aspects[name] = ckpt
        per_aspect[name] = history

    merged: list[HistoryRow] = []
    if per_aspect:
        for e in range(cfg.epochs):
            rows = [h[e] for h in per_aspect.values()]
            accs = [r.dev_accuracy for r in rows if not math.isnan(r.dev_accuracy)]
            merged.append(HistoryRow(
                epoch=e + 1,
                objective=sum(r.objective for r in rows),
                reg_term=sum(r.reg_term for r in rows),
                dev_accuracy=sum(accs) / len(accs) if accs else float("nan")))
    return TrainResult(feature_vocab=feature_vocab, num_classes=cfg.num_classes,
                       aspects=aspects, history=merged, per_aspect_history=per_aspect,
                       config=cfg)


def read_train_config(path) -> dict:
    """Key-value config file: a [train] section whose keys mirror
    TrainConfig fields. Returns only the keys present; unknown keys are
    errors. CLI flags override file values."""
    import configparser

    cp = configparser.ConfigParser()
    with open(path, encoding="utf-8") as fh:
        cp.read_file(fh)
    if not cp.has_section("train"):
        raise TrainingError(f"{path} has no [train] section")
    defaults = TrainConfig()
    out = {}
    for key, raw in cp.items("train"):
        if not hasattr(defaults, key):
            raise TrainingError(f"{path}: unknown training config key {key!r}")
        caster = type(getattr(defaults, key))
        try:
            out[key] = caster(raw)
        except ValueError:
            raise TrainingError(f"{path}: bad value {raw!r} for {key!r}") from None
    return out


def write_history(rows: list[HistoryRow], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch\tobjective\treg_term\tdev_accuracy\n")
        for r in rows:
            fh.write(f"{r.epoch}\t{r.objective!r}\t{r.reg_term!r}\t{r.dev_accuracy!r}\n")


def read_history(path) -> list[HistoryRow]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            e, obj, reg, acc = line.rstrip("\n").split("\t")
            rows.append(HistoryRow(int(e), float(obj), float(reg), float(acc)))
    return rows
