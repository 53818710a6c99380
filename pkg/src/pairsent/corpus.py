"""Corpus ingestion: CoNLL-U and JSON-lines readers, vocabularies,
bag-of-words features, embedding I/O, and deterministic splits."""

from __future__ import annotations

import hashlib
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources

import numpy as np


class CorpusError(Exception):
    """Malformed corpus, embedding, or metadata input."""


@dataclass
class Token:
    form: str
    lemma: str = "_"
    upos: str = "_"
    head: int | None = None   # 1-based index into sentence, 0 = root, None = unparsed
    deprel: str = "_"


@dataclass
class Sentence:
    tokens: list[Token]

    def __len__(self):
        return len(self.tokens)

    @property
    def parsed(self) -> bool:
        return all(t.head is not None for t in self.tokens)


@dataclass
class Document:
    id: str
    sentences: list[Sentence]
    gold_labels: dict[str, int] = field(default_factory=dict)
    overall_polarity: int | None = None

    def tokens(self):
        for sent in self.sentences:
            yield from sent.tokens


@dataclass
class Vocab:
    """Bijective word <-> index mapping with per-word frequencies."""

    index: dict[str, int]
    words: list[str]
    frequency: dict[str, int]

    def __len__(self):
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self.index

    def get(self, word: str) -> int | None:
        return self.index.get(word)

    def sha256(self) -> str:
        return hashlib.sha256("\n".join(self.words).encode("utf-8")).hexdigest()

    @classmethod
    def from_words(cls, words: list[str], frequency: dict[str, int] | None = None) -> "Vocab":
        if frequency is None:
            frequency = {w: 1 for w in words}
        return cls(index={w: i for i, w in enumerate(words)}, words=list(words),
                   frequency=dict(frequency))


@dataclass
class EmbeddingTable:
    dimension: int
    rows: np.ndarray  # (len(vocab), dimension)

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.float64)
        if self.dimension <= 0:
            raise CorpusError("embedding dimension must be positive")
        if self.rows.ndim != 2 or self.rows.shape[1] != self.dimension:
            raise CorpusError("embedding rows do not match declared dimension")


PUNCT_ONLY = lambda s: len(s) > 0 and not any(ch.isalnum() for ch in s)


def default_stopwords() -> frozenset[str]:
    """Stopword list shipped with the package (clinical profile only).

    Comment lines start with '#'; word lines may hold several entries.
    Entries are lowercased to match the lowercased token stream.
    """
    text = resources.files("pairsent").joinpath("data/stopwords.txt").read_text("utf-8")
    words: set[str] = set()
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        words.update(w.lower() for w in line.split())
    return frozenset(words)


def content_words(doc: Document, stopwords: frozenset[str] | None = None):
    """Lowercased token forms with punctuation-only tokens stripped.

    `stopwords`, when given, are dropped too; the parse structure of the
    document is never touched, so head indices stay valid.
    """
    for tok in doc.tokens():
        w = tok.form.lower()
        if PUNCT_ONLY(w):
            continue
        if stopwords is not None and w in stopwords:
            continue
        yield w


# ---------------------------------------------------------------------------
# CoNLL-U

def load_conllu(path) -> list[Document]:
    """Read a 10-column CoNLL-U file into Documents.

    `# newdoc id = <id>` starts a document, `# gold <aspect>=<label>` and
    `# overall=<label>` comments carry gold metadata.  Multiword-token
    ranges (ids like 3-4) and empty nodes (ids like 5.1) are skipped.
    """
    docs: list[Document] = []
    doc: Document | None = None
    seen_ids: set[str] = set()
    sent_rows: list[tuple[int, Token]] = []  # (line_no, token)

    def flush_sentence():
        nonlocal sent_rows
        if not sent_rows:
            return
        if doc is None:
            raise CorpusError(f"line {sent_rows[0][0]}: token row outside any '# newdoc id' block")
        tokens = [t for _, t in sent_rows]
        n = len(tokens)
        roots = 0
        for line_no, tok in sent_rows:
            if tok.head is not None:
                if not (0 <= tok.head <= n):
                    raise CorpusError(f"line {line_no}: head {tok.head} outside sentence of length {n}")
                roots += tok.head == 0
        if roots > 1:
            raise CorpusError(f"line {sent_rows[0][0]}: sentence has {roots} root tokens")
        doc.sentences.append(Sentence(tokens))
        sent_rows = []

    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                flush_sentence()
                continue
            if line.startswith("#"):
                comment = line[1:].strip()
                if comment.startswith("newdoc id"):
                    flush_sentence()
                    _, _, doc_id = comment.partition("=")
                    doc_id = doc_id.strip()
                    if not doc_id:
                        raise CorpusError(f"line {line_no}: empty document id")
                    if doc_id in seen_ids:
                        raise CorpusError(f"line {line_no}: duplicate document id {doc_id!r}")
                    seen_ids.add(doc_id)
                    doc = Document(id=doc_id, sentences=[])
                    docs.append(doc)
                elif comment.startswith("gold "):
                    if doc is None:
                        raise CorpusError(f"line {line_no}: gold comment outside any document")
                    body = comment[len("gold "):]
                    aspect, sep, label = body.partition("=")
                    if not sep or not aspect.strip():
                        raise CorpusError(f"line {line_no}: malformed gold comment {line!r}")
                    try:
                        doc.gold_labels[aspect.strip()] = int(label.strip())
                    except ValueError:
                        raise CorpusError(f"line {line_no}: non-integer gold label {label!r}") from None
                elif comment.startswith("overall"):
                    if doc is None:
                        raise CorpusError(f"line {line_no}: overall comment outside any document")
                    _, sep, label = comment.partition("=")
                    if sep:
                        try:
                            doc.overall_polarity = int(label.strip())
                        except ValueError:
                            raise CorpusError(f"line {line_no}: non-integer overall label {label!r}") from None
                continue
            cols = line.split("\t")
            if len(cols) != 10:
                raise CorpusError(f"line {line_no}: expected 10 tab-separated columns, found {len(cols)}")
            tok_id, form, lemma, upos, _xpos, _feats, head, deprel, _deps, _misc = cols
            if "-" in tok_id or "." in tok_id:
                continue
            try:
                int(tok_id)
            except ValueError:
                raise CorpusError(f"line {line_no}: non-integer token id {tok_id!r}") from None
            try:
                head_idx = int(head)
            except ValueError:
                raise CorpusError(f"line {line_no}: non-integer head {head!r}") from None
            if not deprel:
                raise CorpusError(f"line {line_no}: empty deprel")
            sent_rows.append((line_no, Token(form=form, lemma=lemma, upos=upos,
                                             head=head_idx, deprel=deprel)))
    flush_sentence()
    return docs


def save_conllu(docs: list[Document], path) -> None:
    """Inverse of load_conllu for parsed documents (test and adapter support)."""
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(f"# newdoc id = {doc.id}\n")
            for aspect in sorted(doc.gold_labels):
                fh.write(f"# gold {aspect}={doc.gold_labels[aspect]}\n")
            if doc.overall_polarity is not None:
                fh.write(f"# overall={doc.overall_polarity}\n")
            for sent in doc.sentences:
                for i, tok in enumerate(sent.tokens, start=1):
                    head = tok.head if tok.head is not None else 0
                    fh.write("\t".join([str(i), tok.form, tok.lemma, tok.upos, "_", "_",
                                        str(head), tok.deprel, "_", "_"]) + "\n")
                fh.write("\n")


# ---------------------------------------------------------------------------
# JSON-lines (pre-tokenized, unparsed; clinical path)

def load_jsonl(path, profile: str = "default",
               stopwords: frozenset[str] | None = None) -> list[Document]:
    """Read {"id", "sentences": [[token,...],...], "gold": {...}} JSON-lines.

    Tokens are lowercased and punctuation-only tokens dropped at load time
    (there is no parse to keep consistent).  Under profile="clinical" the
    stopword list is applied as well.
    """
    if profile == "clinical" and stopwords is None:
        stopwords = default_stopwords()
    elif profile != "clinical":
        stopwords = None
    docs: list[Document] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {line_no}: invalid JSON ({exc})") from None
            try:
                doc_id = str(obj["id"])
                sentences = obj["sentences"]
            except KeyError as exc:
                raise CorpusError(f"line {line_no}: missing field {exc}") from None
            if doc_id in seen:
                raise CorpusError(f"line {line_no}: duplicate document id {doc_id!r}")
            seen.add(doc_id)
            doc = Document(id=doc_id, sentences=[])
            for sent in sentences:
                toks = []
                for w in sent:
                    w = str(w).lower()
                    if PUNCT_ONLY(w) or (stopwords is not None and w in stopwords):
                        continue
                    toks.append(Token(form=w))
                if toks:
                    doc.sentences.append(Sentence(toks))
            for aspect, label in (obj.get("gold") or {}).items():
                doc.gold_labels[str(aspect)] = int(label)
            if obj.get("overall") is not None:
                doc.overall_polarity = int(obj["overall"])
            docs.append(doc)
    return docs


def load_corpus(path, profile: str = "default") -> list[Document]:
    """Dispatch on file suffix: .conllu -> parsed, .jsonl/.json -> pre-tokenized."""
    p = str(path)
    if p.endswith(".conllu") or p.endswith(".conll"):
        return load_conllu(path)
    return load_jsonl(path, profile=profile)


# ---------------------------------------------------------------------------
# Vocabulary and features

def build_vocab(docs: list[Document], min_count: int = 1,
                stopwords: frozenset[str] | None = None) -> Vocab:
    """Frequency-filtered vocabulary over lowercased content words.

    Indices are assigned by descending frequency, ties broken
    lexicographically, so identical corpora always yield identical ids.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts = Counter()
    for doc in docs:
        counts.update(content_words(doc, stopwords))
    kept = [(w, c) for w, c in counts.items() if c >= min_count]
    kept.sort(key=lambda wc: (-wc[1], wc[0]))
    words = [w for w, _ in kept]
    return Vocab(index={w: i for i, w in enumerate(words)}, words=words,
                 frequency={w: c for w, c in kept})


def bow_features(doc: Document, vocab: Vocab,
                 stopwords: frozenset[str] | None = None) -> np.ndarray:
    """L2-normalized term-frequency vector; zero vector when nothing is in-vocab."""
    if len(vocab) == 0:
        raise ValueError("vocab is empty")
    x = np.zeros(len(vocab), dtype=np.float64)
    for w in content_words(doc, stopwords):
        i = vocab.index.get(w)
        if i is not None:
            x[i] += 1.0
    norm = math.sqrt(float(np.dot(x, x)))
    if norm > 0:
        x /= norm
    return x


def feature_matrix(docs: list[Document], vocab: Vocab,
                   stopwords: frozenset[str] | None = None) -> np.ndarray:
    return np.stack([bow_features(d, vocab, stopwords) for d in docs]) if docs \
        else np.zeros((0, len(vocab)))


# ---------------------------------------------------------------------------
# Embeddings (word2vec text format)

def load_embeddings(path) -> tuple[Vocab, EmbeddingTable]:
    """Read "count dim" header then one "word v1 .. vdim" row per line."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise CorpusError("embedding header must be 'count dim'")
        try:
            count, dim = int(header[0]), int(header[1])
        except ValueError:
            raise CorpusError("embedding header must hold two integers") from None
        if dim <= 0:
            raise CorpusError("embedding dimension must be positive")
        words: list[str] = []
        rows = np.zeros((count, dim), dtype=np.float64)
        for i, line in enumerate(fh):
            if not line.strip():
                continue
            if i >= count:
                raise CorpusError(f"more embedding rows than header count {count}")
            parts = line.rstrip("\n").split(" ")
            word, values = parts[0], [v for v in parts[1:] if v]
            if len(values) != dim:
                raise CorpusError(
                    f"word {word!r}: expected {dim} values, found {len(values)}")
            words.append(word)
            rows[i] = [float(v) for v in values]
        if len(words) != count:
            raise CorpusError(f"header promised {count} rows, found {len(words)}")
    return Vocab.from_words(words), EmbeddingTable(dimension=dim, rows=rows)


def save_embeddings(vocab: Vocab, table: EmbeddingTable, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(vocab)} {table.dimension}\n")
        for i, word in enumerate(vocab.words):
            vals = " ".join(repr(float(v)) for v in table.rows[i])
            fh.write(f"{word} {vals}\n")


# ---------------------------------------------------------------------------
# Splits

def split_corpus(docs: list[Document], ratios: tuple[float, float, float] = (8, 1, 1),
                 seed: int = 42) -> tuple[list[Document], list[Document], list[Document]]:
    """Deterministic shuffled partition into train/dev/test.

    Sizes follow the largest-remainder method, so each split is within one
    document of its exact proportional share.
    """
    if any(r <= 0 for r in ratios):
        raise ValueError("split ratios must be positive")
    n = len(docs)
    if n < 3:
        raise ValueError(f"need at least 3 documents to split, got {n}")
    total = float(sum(ratios))
    exact = [n * r / total for r in ratios]
    sizes = [int(e) for e in exact]
    remainders = sorted(range(3), key=lambda i: (-(exact[i] - sizes[i]), i))
    for i in range(n - sum(sizes)):
        sizes[remainders[i]] += 1
    order = np.random.default_rng(seed).permutation(n)
    shuffled = [docs[i] for i in order]
    train = shuffled[:sizes[0]]
    dev = shuffled[sizes[0]:sizes[0] + sizes[1]]
    test = shuffled[sizes[0] + sizes[1]:]
    return train, dev, test
