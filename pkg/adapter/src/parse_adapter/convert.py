"""Raw-text corpora to the CoNLL-U dialect the pairsent loaders consume.

Input is JSON-lines with {"id", "text"} plus optional {"gold": {aspect:
label}} and {"overall": label}; output carries those through as
`# newdoc id`, `# gold aspect=label`, and `# overall=label` comments.
The written file is re-read with pairsent's own loader before adapt()
returns, so a successful call guarantees a loadable corpus.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

from pairsent.corpus import CorpusError, Document, Sentence, load_conllu

from .backends import AdapterError, get_backend

log = logging.getLogger(__name__)


@dataclass
class RawDoc:
    id: str
    text: str
    gold: dict[str, int] = field(default_factory=dict)
    overall: int | None = None


@dataclass
class AdaptReport:
    documents: int = 0
    sentences: int = 0
    tokens: int = 0
    skipped: list[str] = field(default_factory=list)

    def line(self) -> str:
        out = (f"{self.documents} docs, {self.sentences} sentences, "
               f"{self.tokens} tokens")
        if self.skipped:
            out += f"; skipped {len(self.skipped)} empty: {', '.join(self.skipped)}"
        return out


def read_raw_jsonl(path) -> list[RawDoc]:
    docs: list[RawDoc] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{line_no}: invalid JSON: {exc}") from None
            if "id" not in obj or "text" not in obj:
                raise CorpusError(f"{path}:{line_no}: record needs 'id' and 'text'")
            doc_id = str(obj["id"])
            if doc_id in seen:
                raise CorpusError(f"{path}:{line_no}: duplicate document id {doc_id!r}")
            seen.add(doc_id)
            gold = {str(a): int(lbl) for a, lbl in (obj.get("gold") or {}).items()}
            overall = obj.get("overall")
            docs.append(RawDoc(id=doc_id, text=str(obj["text"]), gold=gold,
                               overall=None if overall is None else int(overall)))
    return docs


def _clean(cell: str) -> str:
    # CoNLL-U cells are tab-separated single lines
    cell = cell.replace("\t", " ").replace("\n", " ").replace("\r", " ").strip()
    return cell or "_"


def _write_conllu(docs: list[Document], path, header: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# {header}\n")
        for doc in docs:
            fh.write(f"# newdoc id = {doc.id}\n")
            for aspect in sorted(doc.gold_labels):
                fh.write(f"# gold {aspect}={doc.gold_labels[aspect]}\n")
            if doc.overall_polarity is not None:
                fh.write(f"# overall={doc.overall_polarity}\n")
            for sent in doc.sentences:
                for i, tok in enumerate(sent.tokens, start=1):
                    fh.write("\t".join([
                        str(i), _clean(tok.form), _clean(tok.lemma),
                        _clean(tok.upos), "_", "_", str(tok.head),
                        _clean(tok.deprel), "_", "_"]) + "\n")
                fh.write("\n")


def adapt(raw_path, out_path, parser_name: str = "spacy",
          **backend_kwargs) -> AdaptReport:
    """Parse every document in raw_path and write out_path as CoNLL-U.

    Documents whose text is empty (or parses to no tokens) are skipped
    with a warning and listed in the report. The output is validated by
    re-loading it before returning.
    """
    backend = get_backend(parser_name, **backend_kwargs)
    raw_docs = read_raw_jsonl(raw_path)

    report = AdaptReport()
    parsed: list[Document] = []
    for raw in raw_docs:
        sentences = backend.parse(raw.text) if raw.text.strip() else []
        if not sentences:
            log.warning("document %r has no parseable text; skipped", raw.id)
            report.skipped.append(raw.id)
            continue
        parsed.append(Document(id=raw.id,
                               sentences=[Sentence(s) for s in sentences],
                               gold_labels=dict(raw.gold),
                               overall_polarity=raw.overall))
        report.documents += 1
        report.sentences += len(sentences)
        report.tokens += sum(len(s) for s in sentences)

    header = f"generator = pairsent-adapter backend={backend.name} ({backend.version})"
    _write_conllu(parsed, out_path, header)

    loaded = load_conllu(out_path)
    if [d.id for d in loaded] != [d.id for d in parsed]:
        raise AdapterError(f"round-trip mismatch writing {out_path}")
    if sum(len(s.tokens) for d in loaded for s in d.sentences) != report.tokens:
        raise AdapterError(f"token count changed writing {out_path}")
    return report
