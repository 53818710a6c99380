"""Synthetic corpora with known latent polarities.

Documents are built to satisfy the model's generative assumptions: per
document and aspect a latent class is drawn uniformly, then target-opinion
sentences are emitted with opinion words drawn from a class-conditional
distribution. The distributions are mixtures of a class-private uniform
block and a shared uniform background, so their pairwise total-variation
distance equals the configured separation exactly. Filler tokens are
class-independent: any signal a classifier finds must come from the pair
words.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .corpus import EmbeddingTable, Vocab, save_embeddings
from .extraction import SYNTH, WordPair, save_pairs


class SynthError(Exception):
    pass


@dataclass
class SynthConfig:
    num_docs: int = 1000
    num_aspects: int = 2
    num_classes: int = 2
    targets_per_aspect: int = 3
    opinions_per_class: int = 4
    filler_vocab_size: int = 20
    doc_length: int = 40
    pair_rate: float = 3.0       # Poisson mean, clamped to >= 1 per doc-aspect
    class_separation: float = 1.0
    seed: int = 42

    def __post_init__(self):
        counts = (self.num_docs, self.num_aspects, self.num_classes,
                  self.targets_per_aspect, self.opinions_per_class,
                  self.filler_vocab_size, self.doc_length)
        if any(c < 1 for c in counts):
            raise SynthError("all counts must be >= 1")
        if self.num_classes < 2:
            raise SynthError("num_classes must be >= 2")
        if not 0.0 <= self.class_separation <= 1.0:
            raise SynthError("class_separation must lie in [0, 1]")
        if self.pair_rate <= 0:
            raise SynthError("pair_rate must be positive")

    def aspect_names(self) -> list[str]:
        return [f"aspect{a}" for a in range(self.num_aspects)]

    def target_words(self, aspect: int) -> list[str]:
        return [f"t{aspect}_{i}" for i in range(self.targets_per_aspect)]

    def opinion_words(self, aspect: int) -> list[str]:
        """Aspect's opinion vocabulary: num_classes blocks of equal size."""
        return [f"o{aspect}_{c}_{k}" for c in range(self.num_classes)
                for k in range(self.opinions_per_class)]

    def filler_words(self) -> list[str]:
        return [f"f{k}" for k in range(self.filler_vocab_size)]

    def class_distribution(self, c: int) -> np.ndarray:
        """Opinion distribution for class c over one aspect's opinion vocab.

        separation * uniform(own block) + (1 - separation) * uniform(all);
        the total-variation distance between any two classes is exactly
        the separation.
        """
        m = self.opinions_per_class
        v = self.num_classes * m
        dist = np.full(v, (1.0 - self.class_separation) / v)
        dist[c * m:(c + 1) * m] += self.class_separation / m
        return dist


@dataclass
class SynthData:
    config: SynthConfig
    records: list[dict]            # JSON-lines corpus rows
    pairs: list[WordPair]
    latent: dict[tuple[str, int], int]   # (doc_id, aspect_id) -> class
    emb_vocab: Vocab
    emb_table: EmbeddingTable


def generate(cfg: SynthConfig) -> SynthData:
    """Draw a corpus; same config means identical output, byte for byte."""
    seq = np.random.SeedSequence(cfg.seed)
    rng_docs, rng_emb = (np.random.default_rng(s) for s in seq.spawn(2))

    names = cfg.aspect_names()
    dists = {(a, c): cfg.class_distribution(c)
             for a in range(cfg.num_aspects) for c in range(cfg.num_classes)}
    width = max(5, len(str(cfg.num_docs)))
    fillers = cfg.filler_words()

    records: list[dict] = []
    pairs: list[WordPair] = []
    latent: dict[tuple[str, int], int] = {}
    for d in range(cfg.num_docs):
        doc_id = f"doc{d:0{width}d}"
        sentences: list[list[str]] = []
        gold: dict[str, int] = {}
        classes: list[int] = []
        token_count = 0
        for a in range(cfg.num_aspects):
            c = int(rng_docs.integers(cfg.num_classes))
            gold[names[a]] = c
            classes.append(c)
            latent[(doc_id, a)] = c
            n_pairs = max(1, int(rng_docs.poisson(cfg.pair_rate)))
            targets = cfg.target_words(a)
            opinions = cfg.opinion_words(a)
            for _ in range(n_pairs):
                t = targets[int(rng_docs.integers(len(targets)))]
                o = opinions[int(rng_docs.choice(len(opinions), p=dists[(a, c)]))]
                sentences.append([t, o])
                token_count += 2
                pairs.append(WordPair(target=t, opinion=o, aspect_id=a,
                                      doc_id=doc_id, rule=SYNTH))
        pad = cfg.doc_length - token_count
        if pad > 0:
            sentences.append([fillers[int(i)]
                              for i in rng_docs.integers(len(fillers), size=pad)])
        counts = np.bincount(classes, minlength=cfg.num_classes)
        overall = int(np.argmax(counts))  # majority aspect class; tie -> lowest
        records.append({"id": doc_id, "sentences": sentences, "gold": gold,
                        "overall": overall})

    emb_vocab, emb_table = _embeddings(cfg, rng_emb)
    return SynthData(config=cfg, records=records, pairs=pairs, latent=latent,
                     emb_vocab=emb_vocab, emb_table=emb_table)


def _embeddings(cfg: SynthConfig, rng: np.random.Generator
                ) -> tuple[Vocab, EmbeddingTable]:
    """Block one-hot vectors plus small noise.

    Opinion words of the same (aspect, class) block share a basis direction
    (cosine near 1), different blocks are near-orthogonal; targets of one
    aspect share a direction, fillers another. This gives the similarity
    regularizer real structure to act on.
    """
    words: list[str] = []
    block_of: list[int] = []
    block = 0
    for a in range(cfg.num_aspects):
        for w in cfg.target_words(a):
            words.append(w)
            block_of.append(block)
        block += 1
        for c in range(cfg.num_classes):
            for k in range(cfg.opinions_per_class):
                words.append(f"o{a}_{c}_{k}")
                block_of.append(block + c)
        block += cfg.num_classes
    for w in cfg.filler_words():
        words.append(w)
        block_of.append(block)
    block += 1

    dim = block + 2
    rows = 0.02 * rng.standard_normal((len(words), dim))
    rows[np.arange(len(words)), block_of] += 1.0
    vocab = Vocab.from_words(words)
    return vocab, EmbeddingTable(dimension=dim, rows=rows)


def write_synth(data: SynthData, corpus_path, pairs_path, emb_path) -> None:
    """Emit the JSON-lines corpus, pair TSV, and embedding text files."""
    with open(corpus_path, "w", encoding="utf-8") as fh:
        for rec in data.records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    save_pairs(data.pairs, data.config.aspect_names(), pairs_path)
    save_embeddings(data.emb_vocab, data.emb_table, emb_path)


def bayes_accuracy(cfg: SynthConfig, tail: float = 1e-12) -> float:
    """Exact accuracy of the Bayes-optimal classifier that sees a document's
    opinion-word draws for one aspect (two classes only).

    Each draw lands in the true class's block with probability
    (1 + separation * (num_classes - 1)) / num_classes; with two classes the
    optimal rule is a majority vote over blocks, ties worth 1/2. The pair
    count is the >= 1 clamped Poisson, marginalized to truncation `tail`.
    """
    if cfg.num_classes != 2:
        raise SynthError("exact oracle implemented for two classes")
    s = cfg.class_separation
    p_own = (1.0 + s) / 2.0
    k_max = max(3, int(stats.poisson.ppf(1.0 - tail, cfg.pair_rate)) + 1)
    pmf = stats.poisson.pmf(np.arange(k_max + 1), cfg.pair_rate)
    pmf[1] += pmf[0]  # the generator clamps 0 draws up to 1
    pmf[0] = 0.0
    acc = 0.0
    for k in range(1, k_max + 1):
        own = stats.binom(k, p_own)
        # correct iff own-block draws B exceed k/2; an exact tie is worth 1/2
        correct = 1.0 - own.cdf(k // 2)
        if k % 2 == 0:
            correct += 0.5 * own.pmf(k // 2)
        acc += pmf[k] * correct
    return float(acc / pmf.sum())
