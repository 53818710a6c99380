"""Parser backends, each turning raw text into parsed sentences.

A backend exposes `name`, a `version` string (recorded in the output
header so runs are attributable to a parser version), and
`parse(text) -> list[list[Token]]` where tokens carry 1-based heads
within their sentence and head 0 marks the root. The registry maps the
CLI flag value to a constructor.
"""

from __future__ import annotations

import re

from pairsent.corpus import Token


class AdapterError(Exception):
    pass


_SENT_SPLIT = re.compile(r"(?<=[.!?])\s+")
_TOKEN = re.compile(r"\w+(?:'\w+)?|[^\w\s]")


class StubBackend:
    """Deterministic fallback with no model: regex tokens, flat parse.

    Every sentence gets its first token as root and `dep` edges to it
    from the rest. Structurally valid CoNLL-U, linguistically empty;
    meant for tests and for pipelines that only need tokenization.
    """

    name = "stub"
    version = "builtin-1"

    def parse(self, text: str) -> list[list[Token]]:
        sentences = []
        for chunk in _SENT_SPLIT.split(text):
            forms = _TOKEN.findall(chunk)
            if not forms:
                continue
            sentences.append([
                Token(form=form, lemma=form.lower(), upos="X",
                      head=0 if i == 0 else 1,
                      deprel="root" if i == 0 else "dep")
                for i, form in enumerate(forms)])
        return sentences


class SpacyBackend:
    """spaCy pipeline; tokenization and sentence splits are the model's own."""

    name = "spacy"

    def __init__(self, model: str = "en_core_web_sm"):
        try:
            import spacy
        except ImportError:
            raise AdapterError(
                "the spacy parser is not installed; run `pip install spacy` "
                "and `python -m spacy download en_core_web_sm`") from None
        try:
            self._nlp = spacy.load(model)
        except OSError:
            raise AdapterError(
                f"spacy model {model!r} is missing; run "
                f"`python -m spacy download {model}`") from None
        self.version = f"spacy-{spacy.__version__} {model}"

    def parse(self, text: str) -> list[list[Token]]:
        sentences = []
        for sent in self._nlp(text).sents:
            kept = [t for t in sent if not t.is_space]
            if not kept:
                continue
            index = {t.i: pos + 1 for pos, t in enumerate(kept)}

            def head_of(tok) -> int:
                cur = tok
                while True:
                    if cur.head is cur:       # spacy marks roots as self-headed
                        return 0
                    cur = cur.head
                    if cur.i in index:
                        return index[cur.i]

            sentences.append([
                Token(form=t.text, lemma=t.lemma_ or t.text,
                      upos=t.pos_ or "X", head=head_of(t),
                      deprel="root" if t.head is t else (t.dep_ or "dep").lower())
                for t in kept])
        return sentences


BACKENDS = {"stub": StubBackend, "spacy": SpacyBackend}


def get_backend(name: str, **kwargs):
    try:
        ctor = BACKENDS[name]
    except KeyError:
        raise AdapterError(
            f"unknown parser {name!r}; choices: {', '.join(sorted(BACKENDS))}") from None
    try:
        return ctor(**kwargs)
    except TypeError:
        raise AdapterError(
            f"parser {name!r} does not accept options {sorted(kwargs)}") from None
