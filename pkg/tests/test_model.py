"""Classifier math, opinion scoring, posteriors, and checkpoints."""

from __future__ import annotations

import math

import numpy as np
import pytest

from pairsent.corpus import Vocab
from pairsent.model import (AspectCheckpoint, Checkpoint, ModelError,
                            OpinionModel, SentimentModel, entropy,
                            init_models, is_distribution, load_checkpoint,
                            log_softmax, opinion_log_probs, opinion_softmax,
                            phi, posterior, posterior_batch, save_checkpoint,
                            softmax, true_posterior)


class TestSoftmax:
    def test_zero_weights_give_uniform(self):
        model = SentimentModel(W=np.zeros((3, 4)))
        q = posterior(model, np.array([0.3, -1.0, 2.0, 0.0]))
        np.testing.assert_allclose(q, np.ones(3) / 3.0, atol=1e-15)

    def test_log_odds_example(self):
        q = softmax(np.array([1.0, 1.0 + math.log(3.0)]))
        np.testing.assert_allclose(q, [0.25, 0.75], atol=1e-12)

    def test_shift_invariance(self):
        logits = np.array([3.0, -2.0, 0.5])
        np.testing.assert_allclose(softmax(logits), softmax(logits + 1000.0),
                                   atol=1e-12)
        np.testing.assert_allclose(log_softmax(logits),
                                   log_softmax(logits - 1000.0), atol=1e-12)

    def test_extreme_logits_stay_finite(self):
        q = softmax(np.array([1e4, -1e4]))
        assert np.all(np.isfinite(q))
        assert is_distribution(q)

    def test_rows_are_distributions(self):
        rng = np.random.default_rng(0)
        Q = softmax(rng.normal(0, 5, (10, 4)), axis=-1)
        for row in Q:
            assert is_distribution(row)


class TestEntropy:
    def test_uniform_two_classes(self):
        assert entropy(np.array([0.5, 0.5])) == pytest.approx(math.log(2.0),
                                                              abs=1e-12)

    def test_point_mass_is_zero(self):
        assert entropy(np.array([1.0, 0.0])) == 0.0

    def test_quarter_three_quarters(self):
        expected = -(0.25 * math.log(0.25) + 0.75 * math.log(0.75))
        assert entropy(np.array([0.25, 0.75])) == pytest.approx(expected,
                                                                abs=1e-12)
        assert expected == pytest.approx(0.5623351446188083, abs=1e-12)


def tiny_opinion(num_classes=2, vocab_size=3, seed=0) -> OpinionModel:
    rng = np.random.default_rng(seed)
    vocab = Vocab.from_words([f"w{i}" for i in range(vocab_size)])
    return OpinionModel(A=rng.normal(0, 1, (num_classes, 2)),
                        O=rng.normal(0, 1, (vocab_size, 2)),
                        opinion_vocab=vocab,
                        target_sets={0: frozenset({"thing"})})


class TestOpinionScoring:
    def test_single_word_vocabulary_is_certain(self):
        vocab = Vocab.from_words(["only"])
        model = OpinionModel(A=np.array([[1.0], [2.0]]), O=np.array([[5.0]]),
                             opinion_vocab=vocab,
                             target_sets={0: frozenset({"thing"})})
        p = opinion_softmax(model, "thing", 0, 0)
        np.testing.assert_array_equal(p, [1.0])

    def test_score_gates_on_target_membership(self):
        model = tiny_opinion()
        assert phi(model, 1, "not-a-target", 0, 0) == 0.0
        expected = float(model.A[0] @ model.O[1])
        assert phi(model, 1, "thing", 0, 0) == pytest.approx(expected)

    def test_score_is_linear_in_context_vector(self):
        model = tiny_opinion()
        base = phi(model, 2, "thing", 1, 0)
        scaled = OpinionModel(A=3.0 * model.A, O=model.O,
                              opinion_vocab=model.opinion_vocab,
                              target_sets=model.target_sets)
        assert phi(scaled, 2, "thing", 1, 0) == pytest.approx(3.0 * base)

    def test_gated_out_target_gives_uniform_distribution(self):
        model = tiny_opinion(vocab_size=4)
        p = opinion_softmax(model, "outsider", 0, 0)
        np.testing.assert_allclose(p, np.ones(4) / 4.0, atol=1e-12)

    def test_log_prob_matrix_matches_per_class_softmax(self):
        model = tiny_opinion(num_classes=3, vocab_size=5)
        logP = opinion_log_probs(model)
        for c in range(3):
            np.testing.assert_allclose(np.exp(logP[c]),
                                       opinion_softmax(model, "thing", c, 0),
                                       atol=1e-12)


class TestTruePosterior:
    def test_uniform_prior_is_normalized_likelihood(self):
        model = tiny_opinion(num_classes=3, vocab_size=4, seed=3)
        prior = np.ones(3) / 3.0
        lik = np.array([opinion_softmax(model, "thing", c, 0)[2]
                        for c in range(3)])
        expected = lik / lik.sum()
        got = true_posterior(model, 2, "thing", 0, prior)
        np.testing.assert_allclose(got, expected, atol=1e-12)

    def test_prior_tilts_the_posterior(self):
        model = tiny_opinion(num_classes=2, vocab_size=4, seed=5)
        flat = true_posterior(model, 1, "thing", 0, np.array([0.5, 0.5]))
        tilted = true_posterior(model, 1, "thing", 0, np.array([0.9, 0.1]))
        assert tilted[0] > flat[0]

    def test_wrong_prior_shape_rejected(self):
        model = tiny_opinion()
        with pytest.raises(ModelError):
            true_posterior(model, 0, "thing", 0, np.array([1.0]))


class TestPosterior:
    def test_batch_matches_single(self):
        rng = np.random.default_rng(9)
        model = SentimentModel(W=rng.normal(0, 1, (3, 5)))
        X = rng.normal(0, 1, (4, 5))
        batch = posterior_batch(model, X)
        for i in range(4):
            np.testing.assert_allclose(batch[i], posterior(model, X[i]),
                                        atol=1e-12)

    def test_dimension_mismatch_rejected(self):
        model = SentimentModel(W=np.zeros((2, 3)))
        with pytest.raises(ModelError):
            posterior(model, np.zeros(4))

    def test_non_finite_inputs_rejected(self):
        model = SentimentModel(W=np.zeros((2, 3)))
        with pytest.raises(ModelError):
            posterior(model, np.array([1.0, np.nan, 0.0]))
        with pytest.raises(ModelError):
            SentimentModel(W=np.array([[np.inf, 0.0], [0.0, 0.0]]))


class TestValidation:
    def test_single_class_classifier_rejected(self):
        with pytest.raises(ModelError):
            SentimentModel(W=np.zeros((1, 3)))

    def test_embedding_dimension_mismatch_rejected(self):
        vocab = Vocab.from_words(["a"])
        with pytest.raises(ModelError):
            OpinionModel(A=np.zeros((2, 3)), O=np.zeros((1, 4)),
                         opinion_vocab=vocab)

    def test_vocab_row_count_mismatch_rejected(self):
        vocab = Vocab.from_words(["a", "b"])
        with pytest.raises(ModelError):
            OpinionModel(A=np.zeros((2, 3)), O=np.zeros((1, 3)),
                         opinion_vocab=vocab)

    def test_init_models_uses_given_embeddings(self):
        rng = np.random.default_rng(0)
        vocab = Vocab.from_words(["a", "b"])
        init = np.array([[1.0, 2.0], [3.0, 4.0]])
        _, opinion = init_models(2, 3, vocab, {0: frozenset({"t"})}, rng,
                                 init_embeddings=init)
        np.testing.assert_array_equal(opinion.O, init)
        assert opinion.embed_dim == 2

    def test_init_models_rejects_wrong_row_count(self):
        rng = np.random.default_rng(0)
        vocab = Vocab.from_words(["a", "b"])
        with pytest.raises(ModelError):
            init_models(2, 3, vocab, {}, rng, init_embeddings=np.zeros((3, 2)))


class TestCheckpoint:
    def build(self, with_empty_aspect=False) -> Checkpoint:
        rng = np.random.default_rng(21)
        vocab = Vocab.from_words(["food", "price"], {"food": 3, "price": 2})
        ovocab = Vocab.from_words(["good", "bad"], {"good": 5, "bad": 1})
        sentiment, opinion = init_models(2, 2, ovocab,
                                         {0: frozenset({"food", "meal"})}, rng,
                                         embed_dim=3)
        aspects = {"food": AspectCheckpoint(sentiment=sentiment, opinion=opinion,
                                            prior_logits=np.array([0.2, -0.2]))}
        if with_empty_aspect:
            empty = OpinionModel(A=np.zeros((2, 3)), O=np.zeros((0, 3)),
                                 opinion_vocab=Vocab.from_words([]),
                                 target_sets={})
            aspects["silent"] = AspectCheckpoint(
                sentiment=SentimentModel(W=np.zeros((2, 2))),
                opinion=empty, prior_logits=None)
        return Checkpoint(num_classes=2, feature_vocab=vocab, aspects=aspects,
                          config={"alpha": 0.1}, split_seed=13)

    def test_round_trip_is_exact(self, tmp_path):
        ckpt = self.build()
        path = tmp_path / "ckpt.json"
        save_checkpoint(ckpt, path)
        back = load_checkpoint(path)
        assert back.num_classes == 2
        assert back.split_seed == 13
        assert back.config == {"alpha": 0.1}
        assert back.feature_vocab.words == ["food", "price"]
        assert back.feature_vocab.frequency == {"food": 3, "price": 2}
        a0, b0 = ckpt.aspects["food"], back.aspects["food"]
        np.testing.assert_array_equal(a0.sentiment.W, b0.sentiment.W)
        np.testing.assert_array_equal(a0.opinion.A, b0.opinion.A)
        np.testing.assert_array_equal(a0.opinion.O, b0.opinion.O)
        np.testing.assert_array_equal(a0.prior_logits, b0.prior_logits)
        assert b0.opinion.opinion_vocab.words == ["good", "bad"]
        assert b0.opinion.target_sets == {0: frozenset({"food", "meal"})}

    def test_aspect_without_pairs_round_trips(self, tmp_path):
        ckpt = self.build(with_empty_aspect=True)
        path = tmp_path / "ckpt.json"
        save_checkpoint(ckpt, path)
        back = load_checkpoint(path)
        silent = back.aspects["silent"]
        assert silent.opinion.O.shape == (0, 3)
        assert silent.prior_logits is None
        assert back.aspect_names() == ["food", "silent"]

    def test_corrupt_payload_rejected(self, tmp_path):
        path = tmp_path / "ckpt.json"
        path.write_text('{"format": "something-else"}', encoding="utf-8")
        with pytest.raises(ModelError):
            load_checkpoint(path)
