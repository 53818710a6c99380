"""Self-verification suites behind the `check` subcommand.

Each check returns pass/fail plus a one-line detail, so a failure names
the property that broke. The suites cover: analytic gradients against
central finite differences, the bound property and its KL gap identity,
the Monte-Carlo gradient estimator against the exact expectation, the
assignment solver against factorial brute force, and both samplers
against their configured distributions.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .corpus import Vocab
from .evaluation import brute_force_assignment, hungarian
from .model import OpinionModel, SentimentModel, log_softmax, softmax
from . import training
from .training import (Batch, EXACT_L1, EXACT_L2, NEG_SAMPLING_L3,
                       brute_force_log_likelihood, elbo_exact,
                       exact_expectation_grad, gradient_check,
                       negative_weights, pair_weights, prior_log_vector,
                       sample_negatives, score_function_grad)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def _toy_problem(rng: np.random.Generator, num_classes=3, feature_dim=4,
                 embed_dim=3, vocab_size=6, num_docs=3, pairs_per_doc=2,
                 negatives=2, with_negatives=False, with_sim=False):
    words = [f"w{i}" for i in range(vocab_size)]
    vocab = Vocab.from_words(words, {w: i + 1 for i, w in enumerate(words)})
    sentiment = SentimentModel(W=rng.normal(0, 0.5, (num_classes, feature_dim)))
    opinion = OpinionModel(A=rng.normal(0, 0.5, (num_classes, embed_dim)),
                           O=rng.normal(0, 0.5, (vocab_size, embed_dim)),
                           opinion_vocab=vocab,
                           target_sets={0: frozenset({"t"})})
    m = num_docs * pairs_per_doc
    pos = rng.integers(vocab_size, size=m)
    negs = None
    if with_negatives:
        weights = negative_weights(np.arange(1, vocab_size + 1, dtype=float))
        negs = np.stack([sample_negatives(rng, weights, int(p), negatives)
                         for p in pos])
    sim = None
    if with_sim:
        raw = rng.uniform(-1, 1, (num_docs, num_docs))
        sim = (raw + raw.T) / 2.0
        np.fill_diagonal(sim, 0.0)
    batch = Batch(X=rng.normal(0, 1.0, (num_docs, feature_dim)),
                  pair_doc=np.repeat(np.arange(num_docs), pairs_per_doc),
                  pair_opinion=pos, negatives=negs, sim=sim)
    return sentiment, opinion, batch


def check_gradients(seed: int = 42, tol: float = 1e-4) -> list[CheckResult]:
    """Analytic vs central-difference gradients on down-sized dimensions."""
    rng = np.random.default_rng(seed)
    cases = []
    s, o, b = _toy_problem(rng)
    cases.append(("gradient: exact objective, learned prior",
                  dict(sentiment=s, opinion=o, prior_logits=rng.normal(0, 0.3, 3),
                       batch=b, objective=EXACT_L1, alpha=0.7)))
    s, o, b = _toy_problem(rng)
    cases.append(("gradient: exact objective, no prior term",
                  dict(sentiment=s, opinion=o, prior_logits=None, batch=b,
                       objective=EXACT_L2, alpha=1.0)))
    s, o, b = _toy_problem(rng, with_negatives=True)
    cases.append(("gradient: sampled objective, frozen negatives",
                  dict(sentiment=s, opinion=o, prior_logits=None, batch=b,
                       objective=NEG_SAMPLING_L3, alpha=0.1)))
    s, o, b = _toy_problem(rng, with_sim=True)
    cases.append(("gradient: regularizer only",
                  dict(sentiment=s, opinion=o, prior_logits=None, batch=b,
                       objective=None, beta=0.4)))
    s, o, b = _toy_problem(rng, with_negatives=True, with_sim=True)
    cases.append(("gradient: full objective with decay",
                  dict(sentiment=s, opinion=o, prior_logits=None, batch=b,
                       objective=NEG_SAMPLING_L3, alpha=0.1, beta=0.3,
                       weight_decay=1e-3)))
    s, o, b = _toy_problem(rng)
    cases.append(("gradient: entropy term at full weight",
                  dict(sentiment=s, opinion=o, prior_logits=None, batch=b,
                       objective=EXACT_L2, alpha=1.0)))
    out = []
    for name, kwargs in cases:
        err = gradient_check(**kwargs)
        out.append(CheckResult(name, err < tol, f"max rel. error {err:.2e} (tol {tol:.0e})"))
    return out


def check_bound(seed: int = 42, draws: int = 100, tol: float = 1e-9) -> list[CheckResult]:
    """elbo(alpha=1) never exceeds the enumerated log-likelihood, and the
    gap equals the summed KL divergence to the exact class posterior."""
    rng = np.random.default_rng(seed)
    worst_violation = -np.inf
    worst_gap_err = 0.0
    for i in range(draws):
        num_classes = int(rng.integers(2, 4))
        vocab_size = int(rng.integers(2, 11))
        s, o, b = _toy_problem(rng, num_classes=num_classes, vocab_size=vocab_size,
                               num_docs=2, pairs_per_doc=2)
        learned = rng.normal(0, 0.5, num_classes) if i % 2 else None
        bound = elbo_exact(b, s, o, prior_logits=learned, alpha=1.0)
        exact = brute_force_log_likelihood(b, o, learned)
        worst_violation = max(worst_violation, bound - exact)

        plog = prior_log_vector(learned, num_classes, EXACT_L1)
        logP = log_softmax(o.A @ o.O.T, axis=-1)
        q = softmax(b.X @ s.W.T, axis=-1)
        kl = 0.0
        for m in range(b.num_pairs):
            joint = logP[:, b.pair_opinion[m]] + plog
            post = softmax(joint)
            qm = q[b.pair_doc[m]]
            kl += float(np.sum(qm * (np.log(qm) - np.log(post))))
        worst_gap_err = max(worst_gap_err, abs((exact - bound) - kl))
    results = [
        CheckResult("bound: never above enumerated log-likelihood",
                    worst_violation <= tol,
                    f"worst bound - loglik = {worst_violation:.3e} over {draws} draws"),
        CheckResult("bound: gap equals summed KL to exact posterior",
                    worst_gap_err < tol,
                    f"worst |gap - KL| = {worst_gap_err:.3e} (tol {tol:.0e})"),
    ]
    return results


def check_estimator(seed: int = 42, samples: int = 100_000) -> list[CheckResult]:
    """Score-function gradient mean vs exact expectation, three classes.

    The tolerance is 3 standard errors per coordinate, with the standard
    error computed exactly by enumerating the three classes.
    """
    rng = np.random.default_rng(seed)
    s, o, b = _toy_problem(rng, num_classes=3, num_docs=2, pairs_per_doc=1)
    est = score_function_grad(b, s, o, None, K=samples, rng=rng, alpha=1.0)
    exact = exact_expectation_grad(b, s, o, None, alpha=1.0)

    q = softmax(b.X @ s.W.T, axis=-1)
    logP = log_softmax(o.A @ o.O.T, axis=-1)
    plog = prior_log_vector(None, 3, EXACT_L1)
    var = np.zeros_like(s.W)
    for m in range(b.num_pairs):
        i = b.pair_doc[m]
        qm = q[i]
        r = logP[:, b.pair_opinion[m]] + plog - np.log(qm)
        # per-sample gradient G_c = r_c (onehot(c) - q) x^T, enumerated
        G = np.zeros((3,) + s.W.shape)
        for c in range(3):
            coeff = -r[c] * qm
            coeff[c] += r[c]
            G[c] = np.outer(coeff, b.X[i])
        mean = np.einsum("c,cij->ij", qm, G)
        var += np.einsum("c,cij->ij", qm, (G - mean) ** 2)
    se = np.sqrt(var / samples)
    excess = np.abs(est - exact) - 3.0 * se
    worst = float(excess.max())
    return [CheckResult("estimator: Monte-Carlo mean within 3 standard errors",
                        bool((np.abs(est - exact) <= 3.0 * se + 1e-12).all()),
                        f"worst |err| - 3 SE = {worst:.3e} at K={samples}")]


def check_hungarian(seed: int = 42, matrices: int = 200) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    worst = 0.0
    row_shift_ok = True
    for i in range(matrices):
        n = int(rng.integers(1, 7))
        cost = rng.uniform(-5, 5, (n, n))
        if i % 3 == 0:
            cost = np.round(cost)  # integer costs provoke ties
        perm = hungarian(cost)
        _, best = brute_force_assignment(cost)
        got = float(cost[np.arange(n), perm].sum())
        worst = max(worst, abs(got - best))
        shifted = cost.copy()
        shifted[int(rng.integers(n))] += float(rng.uniform(-3, 3))
        p2 = hungarian(shifted)
        _, b2 = brute_force_assignment(shifted)
        if abs(float(shifted[np.arange(n), p2].sum()) - b2) > 1e-9:
            row_shift_ok = False
    return [
        CheckResult("assignment: matches factorial brute force",
                    worst <= 1e-9, f"worst cost gap {worst:.3e} over {matrices} matrices"),
        CheckResult("assignment: optimal after single-row shifts",
                    row_shift_ok, "row-constant perturbations re-verified"),
    ]


def check_samplers(seed: int = 42, draws: int = 100_000,
                   p_floor: float = 0.001) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    out = []

    counts = np.array([50, 20, 10, 5, 2, 1], dtype=float)
    weights = negative_weights(counts)
    positive = 0
    expected = weights.copy()
    expected[positive] = 0.0
    expected = expected / expected.sum() * draws
    got = np.zeros_like(expected)
    np.add.at(got, sample_negatives(rng, weights, positive, draws), 1.0)
    none_positive = got[positive] == 0
    chi = stats.chisquare(got[1:], expected[1:])
    out.append(CheckResult(
        "sampler: negatives follow unigram^0.75 with positive excluded",
        bool(none_positive and chi.pvalue > p_floor),
        f"chi-square p = {chi.pvalue:.4f}, positive drawn {int(got[positive])} times"))

    freq = np.array([100, 40, 10, 3], dtype=float)
    ids = np.arange(4)
    w = pair_weights(ids, freq)
    got2 = np.zeros(4)
    picks = rng.choice(4, size=draws, p=w)
    np.add.at(got2, picks, 1.0)
    chi2 = stats.chisquare(got2, w * draws)
    out.append(CheckResult(
        "sampler: pair draws follow frequency^-0.25",
        bool(chi2.pvalue > p_floor), f"chi-square p = {chi2.pvalue:.4f}"))
    return out


def run_all_checks(seed: int = 42) -> list[CheckResult]:
    results: list[CheckResult] = []
    for suite in (check_gradients, check_bound, check_estimator,
                  check_hungarian, check_samplers):
        start = time.perf_counter()
        rows = suite(seed)
        elapsed = time.perf_counter() - start
        for r in rows:
            r.detail += f" [{elapsed:.1f}s suite]"
        results.extend(rows)
    return results
