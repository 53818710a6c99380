"""Corpus loading, vocabulary, features, and splits."""

from __future__ import annotations

import json
import math

import numpy as np
import pytest

from pairsent.corpus import (CorpusError, EmbeddingTable, Vocab, bow_features,
                             build_vocab, content_words, default_stopwords,
                             feature_matrix, load_conllu, load_corpus,
                             load_embeddings, load_jsonl, save_conllu,
                             save_embeddings, split_corpus)
from conftest import flat_doc, parsed_doc, sentence_good_price, tok


def write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


class TestLoadJsonl:
    def test_lowercases_and_strips_punctuation_tokens(self, tmp_path):
        p = tmp_path / "c.jsonl"
        write_jsonl(p, [{"id": "d1", "sentences": [["Great", "Food", "!!", ","]]}])
        docs = load_jsonl(p)
        assert [t.form for t in docs[0].tokens()] == ["great", "food"]

    def test_keeps_alphanumeric_tokens(self, tmp_path):
        p = tmp_path / "c.jsonl"
        write_jsonl(p, [{"id": "d1", "sentences": [["5-star", "a1"]]}])
        docs = load_jsonl(p)
        assert [t.form for t in docs[0].tokens()] == ["5-star", "a1"]

    def test_gold_and_overall_fields(self, tmp_path):
        p = tmp_path / "c.jsonl"
        write_jsonl(p, [{"id": "d1", "sentences": [["ok"]],
                         "gold": {"price": 1}, "overall": 0}])
        doc = load_jsonl(p)[0]
        assert doc.gold_labels == {"price": 1}
        assert doc.overall_polarity == 0

    def test_clinical_profile_applies_stopwords(self, tmp_path):
        stops = default_stopwords()
        assert stops, "packaged stopword list must be nonempty"
        # an alphabetic entry: punctuation-only tokens are stripped in every
        # profile, which would hide the stopword effect
        word = next(w for w in sorted(stops) if w.isalpha())
        p = tmp_path / "c.jsonl"
        write_jsonl(p, [{"id": "d1", "sentences": [[word, "fracture"]]}])
        default = load_jsonl(p)
        clinical = load_jsonl(p, profile="clinical")
        assert [t.form for t in default[0].tokens()] == [word, "fracture"]
        assert [t.form for t in clinical[0].tokens()] == ["fracture"]

    def test_negation_words_survive_the_stopword_list(self):
        stops = default_stopwords()
        assert not ({"no", "not", "never"} & stops)

    def test_duplicate_id_rejected(self, tmp_path):
        p = tmp_path / "c.jsonl"
        write_jsonl(p, [{"id": "d", "sentences": [["a"]]},
                        {"id": "d", "sentences": [["b"]]}])
        with pytest.raises(CorpusError, match="duplicate"):
            load_jsonl(p)

    def test_missing_field_and_bad_json_name_the_line(self, tmp_path):
        p = tmp_path / "c.jsonl"
        p.write_text('{"id": "d1"}\n', encoding="utf-8")
        with pytest.raises(CorpusError, match="line 1"):
            load_jsonl(p)
        p.write_text('{"id": "d1", "sentences": [["a"]]}\nnot json\n',
                     encoding="utf-8")
        with pytest.raises(CorpusError, match="line 2"):
            load_jsonl(p)


class TestConllu:
    def test_round_trip_preserves_structure(self, tmp_path):
        doc = parsed_doc("r1", [sentence_good_price()],
                         gold={"price": 1}, overall=1)
        path = tmp_path / "c.conllu"
        save_conllu([doc], path)
        back = load_conllu(path)
        assert len(back) == 1
        got = back[0]
        assert got.id == "r1"
        assert got.gold_labels == {"price": 1}
        assert got.overall_polarity == 1
        orig = list(doc.tokens())
        rt = list(got.tokens())
        assert [(t.form, t.lemma, t.upos, t.head, t.deprel) for t in rt] == \
               [(t.form, t.lemma, t.upos, t.head, t.deprel) for t in orig]

    def test_load_corpus_dispatches_on_suffix(self, tmp_path):
        doc = parsed_doc("r1", [sentence_good_price()])
        cpath = tmp_path / "c.conllu"
        save_conllu([doc], cpath)
        assert load_corpus(cpath)[0].sentences[0].parsed
        jpath = tmp_path / "c.jsonl"
        write_jsonl(jpath, [{"id": "j1", "sentences": [["plain", "text"]]}])
        assert not load_corpus(jpath)[0].sentences[0].parsed


class TestVocab:
    def test_min_count_filters_rare_words(self):
        docs = [flat_doc("d1", "a a b")]
        vocab = build_vocab(docs, min_count=2)
        assert vocab.words == ["a"]

    def test_order_is_frequency_then_lexicographic(self):
        docs = [flat_doc("d1", "a b"), flat_doc("d2", "b c")]
        vocab = build_vocab(docs)
        assert vocab.words == ["b", "a", "c"]
        assert (vocab.get("b"), vocab.get("a"), vocab.get("c")) == (0, 1, 2)

    def test_stopwords_excluded(self):
        docs = [flat_doc("d1", "the food the")]
        vocab = build_vocab(docs, stopwords=frozenset({"the"}))
        assert vocab.words == ["food"]

    def test_min_count_below_one_rejected(self):
        with pytest.raises(ValueError):
            build_vocab([flat_doc("d1", "a")], min_count=0)

    def test_sha256_tracks_content(self):
        v1 = Vocab.from_words(["a", "b"])
        v2 = Vocab.from_words(["a", "b"])
        v3 = Vocab.from_words(["b", "a"])
        assert v1.sha256() == v2.sha256()
        assert v1.sha256() != v3.sha256()


class TestBowFeatures:
    def test_counts_are_l2_normalized(self):
        docs = [flat_doc("d1", "a a b")]
        vocab = build_vocab(docs)
        x = bow_features(docs[0], vocab)
        expected = np.array([2.0, 1.0]) / math.sqrt(5.0)
        np.testing.assert_allclose(x, expected, rtol=0, atol=1e-15)

    def test_unit_norm_within_tolerance(self):
        docs = [flat_doc("d1", "x y z z y x w")]
        vocab = build_vocab(docs)
        x = bow_features(docs[0], vocab)
        assert abs(float(np.linalg.norm(x)) - 1.0) <= 1e-12

    def test_all_oov_gives_zero_vector(self):
        vocab = Vocab.from_words(["a"])
        x = bow_features(flat_doc("d1", "q r"), vocab)
        assert np.all(x == 0.0)

    def test_empty_vocab_rejected(self):
        with pytest.raises(ValueError):
            bow_features(flat_doc("d1", "a"), Vocab.from_words([]))

    def test_feature_matrix_stacks_rows(self):
        docs = [flat_doc("d1", "a b"), flat_doc("d2", "b b")]
        vocab = build_vocab(docs)
        X = feature_matrix(docs, vocab)
        assert X.shape == (2, 2)
        np.testing.assert_allclose(X[0], bow_features(docs[0], vocab))
        np.testing.assert_allclose(X[1], bow_features(docs[1], vocab))


class TestContentWords:
    def test_strips_punct_and_stopwords_without_touching_parse(self):
        doc = parsed_doc("d", [[tok("Good", head=2, deprel="amod"),
                                tok(",", head=2, deprel="punct"),
                                tok("food", head=0, deprel="root")]])
        assert list(content_words(doc)) == ["good", "food"]
        assert list(content_words(doc, frozenset({"good"}))) == ["food"]
        assert len(doc.sentences[0]) == 3


class TestSplit:
    def test_sizes_follow_ratios(self):
        docs = [flat_doc(f"d{i}", "w") for i in range(10)]
        train, dev, test = split_corpus(docs, (8, 1, 1), seed=0)
        assert (len(train), len(dev), len(test)) == (8, 1, 1)

    def test_partition_is_disjoint_and_complete(self):
        docs = [flat_doc(f"d{i}", "w") for i in range(23)]
        train, dev, test = split_corpus(docs, (8, 1, 1), seed=5)
        ids = [d.id for d in train + dev + test]
        assert sorted(ids) == sorted(d.id for d in docs)
        assert len(set(ids)) == len(ids)
        assert abs(len(train) - 23 * 0.8) < 1
        assert abs(len(dev) - 2.3) < 1
        assert abs(len(test) - 2.3) < 1

    def test_same_seed_same_split(self):
        docs = [flat_doc(f"d{i}", "w") for i in range(30)]
        a = split_corpus(docs, seed=3)
        b = split_corpus(docs, seed=3)
        assert [[d.id for d in part] for part in a] == \
               [[d.id for d in part] for part in b]

    def test_different_seed_shuffles_differently(self):
        docs = [flat_doc(f"d{i}", "w") for i in range(30)]
        a = split_corpus(docs, seed=3)
        b = split_corpus(docs, seed=4)
        assert [d.id for d in a[0]] != [d.id for d in b[0]]

    def test_validation(self):
        docs = [flat_doc(f"d{i}", "w") for i in range(10)]
        with pytest.raises(ValueError):
            split_corpus(docs, (0, 1, 1))
        with pytest.raises(ValueError):
            split_corpus(docs[:2])


class TestEmbeddings:
    def test_round_trip_is_exact(self, tmp_path):
        vocab = Vocab.from_words(["alpha", "beta"])
        table = EmbeddingTable(dimension=3,
                               rows=np.array([[0.1, -2.5, 3.0],
                                              [1e-17, 7.25, -0.0]]))
        path = tmp_path / "emb.txt"
        save_embeddings(vocab, table, path)
        v2, t2 = load_embeddings(path)
        assert v2.words == vocab.words
        assert t2.dimension == 3
        np.testing.assert_array_equal(t2.rows, table.rows)

    def test_header_row_count_enforced(self, tmp_path):
        path = tmp_path / "emb.txt"
        path.write_text("2 2\na 1 2\n", encoding="utf-8")
        with pytest.raises(CorpusError):
            load_embeddings(path)

    def test_dimension_mismatch_names_word(self, tmp_path):
        path = tmp_path / "emb.txt"
        path.write_text("1 3\nfoo 1 2\n", encoding="utf-8")
        with pytest.raises(CorpusError, match="foo"):
            load_embeddings(path)
