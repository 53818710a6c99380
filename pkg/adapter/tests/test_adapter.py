"""Adapter behavior: round trips into the consuming loader, metadata
carry-through, skip/error paths, and (when a parser is installed) real
dependency edges."""

from __future__ import annotations

import json

import pytest

from pairsent.corpus import CorpusError, load_conllu
from parse_adapter import (AdapterError, StubBackend, adapt, get_backend,
                           read_raw_jsonl)
from parse_adapter.cli import main


def write_raw(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r) + "\n")


RECORDS = [
    {"id": "r1", "text": "Very good price. The room is small.",
     "gold": {"price": 1, "room": 0}, "overall": 1},
    {"id": "r2", "text": "I like the smell!", "gold": {"taste": 1}},
    {"id": "r3", "text": "It tastes spicy."},
]


class TestStubRoundTrip:
    def test_ids_gold_and_overall_recovered_exactly(self, tmp_path):
        raw = tmp_path / "raw.jsonl"
        out = tmp_path / "out.conllu"
        write_raw(raw, RECORDS)
        report = adapt(raw, out, parser_name="stub")
        docs = load_conllu(out)
        assert [d.id for d in docs] == ["r1", "r2", "r3"]
        assert docs[0].gold_labels == {"price": 1, "room": 0}
        assert docs[0].overall_polarity == 1
        assert docs[1].gold_labels == {"taste": 1}
        assert docs[1].overall_polarity is None
        assert docs[2].gold_labels == {}
        assert report.documents == 3 and not report.skipped

    def test_token_count_matches_the_parser_tokenization(self, tmp_path):
        raw = tmp_path / "raw.jsonl"
        out = tmp_path / "out.conllu"
        write_raw(raw, RECORDS)
        report = adapt(raw, out, parser_name="stub")
        backend = StubBackend()
        expected = sum(len(s) for r in RECORDS for s in backend.parse(r["text"]))
        loaded = sum(len(s.tokens) for d in load_conllu(out) for s in d.sentences)
        assert report.tokens == expected == loaded

    def test_sentence_splits_and_forms_survive(self, tmp_path):
        raw = tmp_path / "raw.jsonl"
        out = tmp_path / "out.conllu"
        write_raw(raw, [{"id": "d", "text": "Very good price. Bad room!"}])
        adapt(raw, out, parser_name="stub")
        doc = load_conllu(out)[0]
        assert [[t.form for t in s.tokens] for s in doc.sentences] == \
            [["Very", "good", "price", "."], ["Bad", "room", "!"]]
        assert [t.head for t in doc.sentences[0].tokens] == [0, 1, 1, 1]

    def test_identical_runs_write_identical_bytes(self, tmp_path):
        raw = tmp_path / "raw.jsonl"
        write_raw(raw, RECORDS)
        adapt(raw, tmp_path / "a.conllu", parser_name="stub")
        adapt(raw, tmp_path / "b.conllu", parser_name="stub")
        assert (tmp_path / "a.conllu").read_bytes() == \
            (tmp_path / "b.conllu").read_bytes()

    def test_tab_in_text_cannot_corrupt_columns(self, tmp_path):
        raw = tmp_path / "raw.jsonl"
        out = tmp_path / "out.conllu"
        write_raw(raw, [{"id": "d", "text": "odd\tspacing here"}])
        adapt(raw, out, parser_name="stub")
        assert load_conllu(out)[0].id == "d"


class TestSkipsAndEmpty:
    def test_empty_text_is_skipped_with_a_warning(self, tmp_path, caplog):
        raw = tmp_path / "raw.jsonl"
        out = tmp_path / "out.conllu"
        write_raw(raw, [{"id": "empty", "text": "   "},
                        {"id": "kept", "text": "Fine room."}])
        with caplog.at_level("WARNING"):
            report = adapt(raw, out, parser_name="stub")
        assert report.skipped == ["empty"]
        assert "empty" in caplog.text
        assert [d.id for d in load_conllu(out)] == ["kept"]

    def test_empty_corpus_writes_header_only(self, tmp_path):
        raw = tmp_path / "raw.jsonl"
        out = tmp_path / "out.conllu"
        write_raw(raw, [])
        report = adapt(raw, out, parser_name="stub")
        assert report.documents == 0
        lines = out.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 1 and lines[0].startswith("# generator =")
        assert load_conllu(out) == []


class TestErrors:
    def test_unknown_parser_names_the_choices(self):
        with pytest.raises(AdapterError, match="stub"):
            get_backend("malt")

    def test_missing_parser_dependency_names_the_install_hint(self):
        try:
            import spacy  # noqa: F401
        except ImportError:
            with pytest.raises(AdapterError, match="pip install spacy"):
                get_backend("spacy")
        else:
            pytest.skip("spacy installed; unavailability path not reachable")

    def test_duplicate_ids_rejected(self, tmp_path):
        raw = tmp_path / "raw.jsonl"
        write_raw(raw, [{"id": "d", "text": "a."}, {"id": "d", "text": "b."}])
        with pytest.raises(CorpusError, match="duplicate"):
            read_raw_jsonl(raw)

    def test_record_without_text_is_an_error(self, tmp_path):
        raw = tmp_path / "raw.jsonl"
        write_raw(raw, [{"id": "d"}])
        with pytest.raises(CorpusError, match="text"):
            read_raw_jsonl(raw)


class TestCli:
    def test_adapts_and_reports(self, tmp_path, capsys):
        raw = tmp_path / "raw.jsonl"
        out = tmp_path / "out.conllu"
        write_raw(raw, RECORDS)
        assert main([str(raw), str(out), "--parser", "stub"]) == 0
        assert "3 docs" in capsys.readouterr().out
        assert load_conllu(out)

    def test_missing_input_is_io_error(self, tmp_path):
        assert main([str(tmp_path / "nope.jsonl"),
                     str(tmp_path / "out.conllu"), "--parser", "stub"]) == 3

    def test_stub_takes_no_model_option(self, tmp_path, capsys):
        raw = tmp_path / "raw.jsonl"
        write_raw(raw, RECORDS)
        code = main([str(raw), str(tmp_path / "o.conllu"),
                     "--parser", "stub", "--model", "x"])
        capsys.readouterr()
        assert code == 1


class TestRealParser:
    def test_good_price_yields_an_amod_edge(self, tmp_path):
        spacy = pytest.importorskip("spacy")
        try:
            spacy.load("en_core_web_sm")
        except OSError:
            pytest.skip("en_core_web_sm model not downloaded")
        raw = tmp_path / "raw.jsonl"
        out = tmp_path / "out.conllu"
        write_raw(raw, [{"id": "d", "text": "very good price"}])
        adapt(raw, out, parser_name="spacy")
        doc = load_conllu(out)[0]
        edges = {(t.form.lower(), t.deprel,
                  s.tokens[t.head - 1].form.lower() if t.head else None)
                 for s in doc.sentences for t in s.tokens}
        assert ("good", "amod", "price") in edges
