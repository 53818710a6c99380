"""Shared fixtures: hand-parsed sentences, a tiny embedding table for
aspect assignment, toy models for objective tests, and cached synthetic
corpora for the end-to-end suite."""

from __future__ import annotations

import numpy as np
import pytest

from pairsent.corpus import Document, EmbeddingTable, Sentence, Token, Vocab
from pairsent.model import OpinionModel, SentimentModel
from pairsent.training import Batch, sample_negatives, negative_weights
from pairsent import synth


def tok(form: str, lemma: str | None = None, upos: str = "_",
        head: int | None = None, deprel: str = "_") -> Token:
    return Token(form=form, lemma=lemma if lemma is not None else form,
                 upos=upos, head=head, deprel=deprel)


def parsed_doc(doc_id: str, sentences: list[list[Token]],
               gold: dict[str, int] | None = None,
               overall: int | None = None) -> Document:
    return Document(id=doc_id, sentences=[Sentence(s) for s in sentences],
                    gold_labels=gold or {}, overall_polarity=overall)


def flat_doc(doc_id: str, *sentences: str, gold: dict[str, int] | None = None,
             overall: int | None = None) -> Document:
    """Unparsed doc from whitespace-tokenized sentences."""
    sents = [[tok(w) for w in s.split()] for s in sentences]
    return parsed_doc(doc_id, sents, gold=gold, overall=overall)


# --- four canonical parsed sentences, one per dependency rule -------------

def sentence_good_price() -> list[Token]:
    """very good price: amod(price, good) -> (price, good)"""
    return [tok("very", upos="ADV", head=2, deprel="advmod"),
            tok("good", upos="ADJ", head=3, deprel="amod"),
            tok("price", upos="NOUN", head=0, deprel="root")]


def sentence_room_small() -> list[Token]:
    """the room is small: nsubj(small, room), ADJ head -> (room, small)"""
    return [tok("the", upos="DET", head=2, deprel="det"),
            tok("room", upos="NOUN", head=4, deprel="nsubj"),
            tok("is", upos="AUX", head=4, deprel="cop"),
            tok("small", upos="ADJ", head=0, deprel="root")]


def sentence_like_smell() -> list[Token]:
    """i like the smell: dobj under 'like' -> (smell, like)"""
    return [tok("i", upos="PRON", head=2, deprel="nsubj"),
            tok("like", lemma="like", upos="VERB", head=0, deprel="root"),
            tok("the", upos="DET", head=4, deprel="det"),
            tok("smell", upos="NOUN", head=2, deprel="dobj")]


def sentence_tastes_spicy() -> list[Token]:
    """it tastes spicy: xcomp under lemma 'taste' -> (taste, spicy)"""
    return [tok("it", upos="PRON", head=2, deprel="nsubj"),
            tok("tastes", lemma="taste", upos="VERB", head=0, deprel="root"),
            tok("spicy", upos="ADJ", head=2, deprel="xcomp")]


def sentence_soup_tasty() -> list[Token]:
    """the soup was tasty: lemma 'tasty' triggers the implicit-aspect rule"""
    return [tok("the", upos="DET", head=2, deprel="det"),
            tok("soup", upos="NOUN", head=4, deprel="nsubj"),
            tok("was", upos="AUX", head=4, deprel="cop"),
            tok("Tasty", lemma="tasty", upos="ADJ", head=0, deprel="root")]


@pytest.fixture
def golden_doc() -> Document:
    return parsed_doc("golden", [sentence_good_price(), sentence_room_small(),
                                 sentence_like_smell(), sentence_tastes_spicy(),
                                 sentence_soup_tasty()])


@pytest.fixture
def assign_emb() -> tuple[Vocab, EmbeddingTable]:
    """Embeddings where each pair word sits near exactly one aspect seed."""
    rows = {
        "price":  [1.0, 0.0, 0.0, 0.0],
        "room":   [0.0, 1.0, 0.0, 0.0],
        "taste":  [0.0, 0.0, 1.0, 0.0],
        "good":   [0.9, 0.1, 0.0, 0.0],
        "small":  [0.1, 0.9, 0.0, 0.0],
        "smell":  [0.0, 0.0, 0.9, 0.0],
        "like":   [0.1, 0.1, 0.5, 0.0],
        "spicy":  [0.0, 0.0, 0.95, 0.0],
        "pillow": [0.0, 0.85, 0.0, 0.2],
        "soft":   [0.2, 0.5, 0.0, 0.3],
        "zero":   [0.0, 0.0, 0.0, 0.0],
    }
    vocab = Vocab.from_words(list(rows))
    table = EmbeddingTable(dimension=4, rows=np.array(list(rows.values())))
    return vocab, table


# --- toy models for objective/gradient tests ------------------------------

def toy_models(rng: np.random.Generator, num_classes: int = 3,
               feature_dim: int = 4, embed_dim: int = 3, vocab_size: int = 6,
               learned_prior: bool = False,
               ) -> tuple[SentimentModel, OpinionModel, np.ndarray | None]:
    words = [f"w{i}" for i in range(vocab_size)]
    vocab = Vocab.from_words(words, {w: i + 1 for i, w in enumerate(words)})
    sentiment = SentimentModel(W=rng.normal(0, 0.5, (num_classes, feature_dim)))
    opinion = OpinionModel(A=rng.normal(0, 0.5, (num_classes, embed_dim)),
                           O=rng.normal(0, 0.5, (vocab_size, embed_dim)),
                           opinion_vocab=vocab,
                           target_sets={0: frozenset({"thing"})})
    prior = rng.normal(0, 0.3, num_classes) if learned_prior else None
    return sentiment, opinion, prior


def toy_batch(rng: np.random.Generator, num_docs: int = 3,
              pairs_per_doc: int = 2, feature_dim: int = 4,
              vocab_size: int = 6, negatives: int | None = None,
              with_sim: bool = False) -> Batch:
    m = num_docs * pairs_per_doc
    X = rng.normal(0, 1.0, (num_docs, feature_dim))
    pair_doc = np.repeat(np.arange(num_docs), pairs_per_doc)
    pair_opinion = rng.integers(0, vocab_size, m)
    negs = None
    if negatives is not None:
        weights = negative_weights(np.arange(1, vocab_size + 1, dtype=float))
        negs = np.stack([sample_negatives(rng, weights, int(o), negatives)
                         for o in pair_opinion])
    sim = None
    if with_sim:
        sim = rng.normal(0, 1.0, (num_docs, num_docs))
        sim = (sim + sim.T) / 2.0
        np.fill_diagonal(sim, 0.0)
    return Batch(X=X, pair_doc=pair_doc, pair_opinion=pair_opinion,
                 negatives=negs, sim=sim)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


# --- synthetic corpora (session-scoped: generation is deterministic) ------

@pytest.fixture(scope="session")
def synth_small() -> synth.SynthData:
    return synth.generate(synth.SynthConfig(num_docs=200, seed=11))


@pytest.fixture(scope="session")
def synth_files(tmp_path_factory, synth_small) -> dict[str, str]:
    d = tmp_path_factory.mktemp("synth")
    paths = {"corpus": str(d / "corpus.jsonl"), "pairs": str(d / "pairs.tsv"),
             "embeddings": str(d / "embeddings.txt")}
    synth.write_synth(synth_small, paths["corpus"], paths["pairs"],
                      paths["embeddings"])
    return paths
