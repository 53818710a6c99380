"""Target-opinion pair supervision.

Two extraction paths: dependency rules R1-R5 over parsed sentences (with
cosine-similarity aspect assignment), and lexicon windowing for short
unparsed clinical sentences. Pairs are the only supervision the trainer
ever sees.
"""

from __future__ import annotations

import configparser
import logging
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .corpus import Document, EmbeddingTable, Sentence, Vocab

log = logging.getLogger(__name__)

RULES = ("R1", "R2", "R3", "R4", "R5")
WINDOW = "WINDOW"
SYNTH = "SYNTH"  # provenance tag for generated pairs (no rule involved)
PROVENANCE = RULES + (WINDOW, SYNTH)

R3_HEAD_LEMMAS = frozenset({"like", "dislike", "love", "hate"})
R4_HEAD_LEMMAS = frozenset({"seem", "look", "feel", "smell", "taste"})


class ExtractionError(Exception):
    pass


@dataclass(frozen=True)
class WordPair:
    target: str
    opinion: str
    aspect_id: int
    doc_id: str
    rule: str

    def __post_init__(self):
        if not self.target or not self.opinion:
            raise ValueError("target and opinion must be nonempty")
        if self.rule not in PROVENANCE:
            raise ValueError(f"unknown rule {self.rule!r}")


@dataclass
class AspectSpec:
    name: str
    seed_words: list[str]

    def __post_init__(self):
        if not self.seed_words:
            raise ValueError(f"aspect {self.name!r} has no seed words")


@dataclass
class LexiconSpec:
    target_words: list[str]
    opinion_words: list[str]
    max_sentence_len: int = 20
    aspect_name: str = "main"

    def __post_init__(self):
        if not self.target_words or not self.opinion_words:
            raise ValueError("lexicon needs nonempty target and opinion lists")
        overlap = set(self.target_words) & set(self.opinion_words)
        if overlap:
            raise ValueError(f"target and opinion lists overlap: {sorted(overlap)}")


def _norm_rel(deprel: str) -> str:
    # drop UD subtypes (nsubj:pass etc.); obj is the UDv2 spelling of dobj
    rel = deprel.split(":")[0].lower()
    return "dobj" if rel == "obj" else rel


def _lemma(tok) -> str:
    return (tok.lemma if tok.lemma and tok.lemma != "_" else tok.form).lower()


def extract_r1(sentence: Sentence) -> list[tuple[str, str]]:
    """amod edges: (head form, modifier form), e.g. "very good price" -> (price, good)."""
    pairs = []
    for tok in sentence.tokens:
        if _norm_rel(tok.deprel) == "amod" and tok.head:
            head = sentence.tokens[tok.head - 1]
            pairs.append((head.form.lower(), tok.form.lower()))
    return pairs


def extract_r2(sentence: Sentence) -> list[tuple[str, str]]:
    """nsubj edges with adjectival head and nominal subject: (noun, adjective)."""
    pairs = []
    for tok in sentence.tokens:
        if _norm_rel(tok.deprel) == "nsubj" and tok.head:
            head = sentence.tokens[tok.head - 1]
            if head.upos == "ADJ" and tok.upos == "NOUN":
                pairs.append((tok.form.lower(), head.form.lower()))
    return pairs


def extract_r3(sentence: Sentence) -> list[tuple[str, str]]:
    """dobj edges under like/dislike/love/hate: (object form, verb lemma)."""
    pairs = []
    for tok in sentence.tokens:
        if _norm_rel(tok.deprel) == "dobj" and tok.head:
            head = sentence.tokens[tok.head - 1]
            if _lemma(head) in R3_HEAD_LEMMAS:
                pairs.append((tok.form.lower(), _lemma(head)))
    return pairs


def extract_r4(sentence: Sentence) -> list[tuple[str, str]]:
    """xcomp edges under seem/look/feel/smell/taste: (verb lemma, complement form)."""
    pairs = []
    for tok in sentence.tokens:
        if _norm_rel(tok.deprel) == "xcomp" and tok.head:
            head = sentence.tokens[tok.head - 1]
            if _lemma(head) in R4_HEAD_LEMMAS:
                pairs.append((_lemma(head), tok.form.lower()))
    return pairs


def extract_r5(sentence: Sentence, implicit_map: dict[str, int],
               aspect_names: list[str]) -> list[tuple[str, str, int]]:
    """Adjectives that implicitly name an aspect, e.g. tasty -> (taste, tasty).

    The mapped aspect is authoritative: these pairs bypass aspect assignment.
    An empty map disables the rule.
    """
    if not implicit_map:
        return []
    out = []
    for tok in sentence.tokens:
        aspect_id = implicit_map.get(_lemma(tok))
        if aspect_id is not None:
            out.append((aspect_names[aspect_id], tok.form.lower(), aspect_id))
    return out


def assign_aspect(target: str, opinion: str, aspects: list[AspectSpec],
                  emb_vocab: Vocab, emb: EmbeddingTable) -> int | None:
    """Aspect whose seed word is most cosine-similar to either pair word.

    None when both pair words are out of the embedding vocabulary (caller
    drops the pair). Ties go to the lowest aspect index.
    """
    if not aspects:
        raise ExtractionError("at least one aspect required")
    best_id, best_sim = None, -np.inf
    for word in (target, opinion):
        i = emb_vocab.get(word)
        if i is None:
            continue
        v = emb.rows[i]
        nv = np.linalg.norm(v)
        if nv == 0:
            continue
        for aid, spec in enumerate(aspects):
            for seed in spec.seed_words:
                j = emb_vocab.get(seed)
                if j is None:
                    continue
                u = emb.rows[j]
                nu = np.linalg.norm(u)
                if nu == 0:
                    continue
                sim = float(np.dot(v, u) / (nv * nu))
                if sim > best_sim or (sim == best_sim and best_id is not None and aid < best_id):
                    best_id, best_sim = aid, sim
    return best_id


def window_extract(doc: Document, lex: LexiconSpec, aspect_id: int = 0) -> list[WordPair]:
    """Nearest target-opinion co-occurrence per sentence chunk.

    Sentences longer than max_sentence_len are cut into consecutive chunks
    of at most that many tokens. Within a chunk holding at least one target
    and one opinion word, the (target, opinion) pair with minimal token
    distance is emitted; ties break leftmost (target position, then opinion
    position).
    """
    targets = {w.lower() for w in lex.target_words}
    opinions = {w.lower() for w in lex.opinion_words}
    out = []
    for sent in doc.sentences:
        toks = [t.form.lower() for t in sent.tokens]
        for start in range(0, len(toks), lex.max_sentence_len):
            chunk = toks[start:start + lex.max_sentence_len]
            t_pos = [i for i, w in enumerate(chunk) if w in targets]
            o_pos = [i for i, w in enumerate(chunk) if w in opinions]
            if not t_pos or not o_pos:
                continue
            ti, oi = min(((t, o) for t in t_pos for o in o_pos),
                         key=lambda to: (abs(to[0] - to[1]), to[0], to[1]))
            out.append(WordPair(target=chunk[ti], opinion=chunk[oi],
                                aspect_id=aspect_id, doc_id=doc.id, rule=WINDOW))
    return out


@dataclass
class ExtractionReport:
    emitted: Counter = field(default_factory=Counter)   # rule -> pairs kept
    dropped: Counter = field(default_factory=Counter)   # rule -> pairs dropped (OOV)

    def lines(self) -> list[str]:
        rules = sorted(set(self.emitted) | set(self.dropped))
        return [f"{r}\t{self.emitted.get(r, 0)}\t{self.dropped.get(r, 0)}" for r in rules]


def _extract_rule_doc(rule: str, doc: Document, aspects: list[AspectSpec],
                      aspect_names: list[str], emb_vocab: Vocab,
                      emb: EmbeddingTable, implicit_map: dict[str, int],
                      ) -> tuple[list[WordPair], int, int]:
    extractors = {"R1": extract_r1, "R2": extract_r2, "R3": extract_r3, "R4": extract_r4}
    pairs: list[WordPair] = []
    emitted = dropped = 0
    for sent in doc.sentences:
        if rule == "R5":
            for target, opinion, aid in extract_r5(sent, implicit_map, aspect_names):
                pairs.append(WordPair(target=target, opinion=opinion,
                                      aspect_id=aid, doc_id=doc.id, rule=rule))
                emitted += 1
            continue
        if not sent.parsed:
            continue
        for target, opinion in extractors[rule](sent):
            aid = assign_aspect(target, opinion, aspects, emb_vocab, emb)
            if aid is None:
                dropped += 1
                continue
            pairs.append(WordPair(target=target, opinion=opinion,
                                  aspect_id=aid, doc_id=doc.id, rule=rule))
            emitted += 1
    return pairs, emitted, dropped


def extract_all(docs: list[Document], ruleset: set[str], aspects: list[AspectSpec],
                emb_vocab: Vocab, emb: EmbeddingTable,
                implicit_map: dict[str, int] | None = None, threads: int = 1,
                ) -> tuple[list[WordPair], ExtractionReport]:
    """Run the selected rules over a parsed corpus, rule-major order.

    R1-R4 candidates go through aspect assignment; R5 pairs carry their own
    aspect. Pairs whose words are all out of the embedding vocabulary are
    dropped and counted in the report. threads > 1 fans documents out to a
    thread pool; results merge in document order, so output is identical
    either way.
    """
    unknown = ruleset - set(RULES)
    if unknown:
        raise ExtractionError(f"unknown rules: {sorted(unknown)}")
    aspect_names = [a.name for a in aspects]
    implicit_map = implicit_map or {}
    pairs: list[WordPair] = []
    report = ExtractionReport()
    for rule in RULES:
        if rule not in ruleset:
            continue
        worker = lambda doc: _extract_rule_doc(rule, doc, aspects, aspect_names,
                                               emb_vocab, emb, implicit_map)
        if threads > 1:
            from concurrent.futures import ThreadPoolExecutor
            with ThreadPoolExecutor(max_workers=threads) as ex:
                results = list(ex.map(worker, docs))
        else:
            results = [worker(doc) for doc in docs]
        for doc_pairs, emitted, dropped in results:
            pairs.extend(doc_pairs)
            if emitted:
                report.emitted[rule] += emitted
            if dropped:
                report.dropped[rule] += dropped
    return pairs, report


# ---------------------------------------------------------------------------
# Pair file: tab-separated doc_id, aspect name, target, opinion, rule

def save_pairs(pairs: list[WordPair], aspect_names: list[str], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# aspects = " + " ".join(aspect_names) + "\n")
        for p in pairs:
            fh.write(f"{p.doc_id}\t{aspect_names[p.aspect_id]}\t{p.target}\t{p.opinion}\t{p.rule}\n")


def pair_file_aspects(path) -> list[str]:
    """Ordered aspect universe declared in the pair file's header comment."""
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().strip()
    if not first.startswith("# aspects ="):
        raise ExtractionError(f"{path} has no '# aspects =' header")
    return first.split("=", 1)[1].split()


def load_pairs(path, aspect_names: list[str] | None = None) -> list[WordPair]:
    """Read a pair TSV; aspect ids come from aspect_names when given, else
    from the file's own header."""
    if aspect_names is None:
        aspect_names = pair_file_aspects(path)
    name_to_id = {n: i for i, n in enumerate(aspect_names)}
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) != 5:
                raise ExtractionError(f"line {line_no}: expected 5 columns, found {len(cols)}")
            doc_id, aspect, target, opinion, rule = cols
            if aspect not in name_to_id:
                raise ExtractionError(f"line {line_no}: undeclared aspect {aspect!r}")
            pairs.append(WordPair(target=target, opinion=opinion,
                                  aspect_id=name_to_id[aspect], doc_id=doc_id, rule=rule))
    return pairs


# ---------------------------------------------------------------------------
# Declarative configs (INI sections; lists are whitespace separated)

def load_aspects(path, emb_vocab: Vocab | None = None,
                 ) -> tuple[list[AspectSpec], dict[str, int]]:
    """Aspect sections with seed lists, plus an optional [implicit] section
    mapping rule-5 adjectives to aspect names.

    Seeds missing from the embedding vocabulary are warned about and
    dropped when a vocabulary is given.
    """
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise ExtractionError(f"cannot read aspect config {path}")
    aspects: list[AspectSpec] = []
    implicit_names: dict[str, str] = {}
    for section in cp.sections():
        if section == "implicit":
            implicit_names = {w.lower(): a for w, a in cp.items(section)}
            continue
        seeds = cp.get(section, "seeds", fallback="").split()
        if emb_vocab is not None:
            kept = [s for s in seeds if s in emb_vocab]
            for s in seeds:
                if s not in emb_vocab:
                    log.warning("aspect %s: seed %r not in embedding vocab, dropped", section, s)
            seeds = kept
        if not seeds:
            raise ExtractionError(f"aspect {section!r} has no usable seed words")
        aspects.append(AspectSpec(name=section, seed_words=seeds))
    if not aspects:
        raise ExtractionError(f"no aspect sections in {path}")
    name_to_id = {a.name: i for i, a in enumerate(aspects)}
    implicit_map = {}
    for word, aspect in implicit_names.items():
        if aspect not in name_to_id:
            raise ExtractionError(f"[implicit] {word}: undeclared aspect {aspect!r}")
        implicit_map[word] = name_to_id[aspect]
    return aspects, implicit_map


def load_lexicon_spec(path) -> LexiconSpec:
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise ExtractionError(f"cannot read lexicon config {path}")
    if not cp.has_section("lexicon"):
        raise ExtractionError(f"{path} has no [lexicon] section")
    sec = cp["lexicon"]
    return LexiconSpec(
        target_words=sec.get("targets", "").split(),
        opinion_words=sec.get("opinions", "").split(),
        max_sentence_len=sec.getint("max_sentence_len", fallback=20),
        aspect_name=sec.get("aspect", fallback="main"),
    )
