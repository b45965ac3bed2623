"""Document sets: loading, validation, tokenization, and sentence filtering.

A corpus is a JSON-lines file with one document set per line:

    {"set_id": str,
     "documents": [{"doc_id": str, "sentences": [str, ...]}, ...],
     "references": [str, ...]}

A document may carry a raw "text" field instead of "sentences"; a naive
splitter (break after ./!/? followed by whitespace) is applied in that case.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

# Characters stripped from token boundaries; interior punctuation is kept.
_STRIP_CHARS = "".join(
    [
        "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~",
        "“”‘’«»…",
    ]
)

_QUOTE_CHARS = ("\"", "'", "`", "“", "‘")

_SENT_BOUNDARY = re.compile(r"(?<=[.!?])\s+")


class CorpusError(Exception):
    """Raised for malformed corpus files or invalid document sets."""


class AllSentencesFiltered(CorpusError):
    """Every sentence of a set was removed by the filter."""

    def __init__(self, set_id: str):
        super().__init__(f"all sentences of set {set_id!r} were filtered out")
        self.set_id = set_id


def tokenize(text: str) -> tuple[str, ...]:
    """Lowercase and split on whitespace, stripping surrounding punctuation.

    Interior hyphens/apostrophes/periods survive ("U.S.-led" -> "u.s.-led").
    Tokens that are pure punctuation are dropped.
    """
    out = []
    for raw in text.lower().split():
        tok = raw.strip(_STRIP_CHARS)
        if tok:
            out.append(tok)
    return tuple(out)


def split_sentences(text: str) -> list[str]:
    """Naive sentence splitter for raw-text ingestion."""
    return [part.strip() for part in _SENT_BOUNDARY.split(text) if part.strip()]


@dataclass(frozen=True)
class Sentence:
    doc_id: str
    index_in_doc: int
    global_index: int
    text: str
    tokens: tuple[str, ...]

    @property
    def word_count(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class Document:
    doc_id: str
    sentences: tuple[Sentence, ...]


@dataclass(frozen=True)
class DocumentSet:
    set_id: str
    documents: tuple[Document, ...]
    references: tuple[str, ...]

    @property
    def sentences(self) -> tuple[Sentence, ...]:
        """All sentences in global order (documents in order, sentences in order)."""
        return tuple(s for doc in self.documents for s in doc.sentences)

    def __len__(self) -> int:
        return sum(len(doc.sentences) for doc in self.documents)


@dataclass(frozen=True)
class FilterConfig:
    min_words: int = 8
    max_words: int = 55
    reject_leading_quote: bool = True
    require_terminal_period: bool = True

    def __post_init__(self):
        if not (0 < self.min_words <= self.max_words):
            raise ValueError(
                f"need 0 < min_words <= max_words, got {self.min_words}..{self.max_words}"
            )


def build_document_set(
    set_id: str,
    documents: Sequence[tuple[str, Sequence[str]]],
    references: Sequence[str],
) -> DocumentSet:
    """Assemble a validated DocumentSet from (doc_id, sentence texts) pairs."""
    if not documents:
        raise CorpusError(f"set {set_id!r} has no documents")
    if not references or any(not r.strip() for r in references):
        raise CorpusError(f"set {set_id!r} has empty references")
    seen_docs: set[str] = set()
    docs = []
    gidx = 0
    for doc_id, texts in documents:
        if doc_id in seen_docs:
            raise CorpusError(f"duplicate doc_id {doc_id!r} in set {set_id!r}")
        seen_docs.add(doc_id)
        sents = []
        for i, text in enumerate(texts):
            tokens = tokenize(text)
            if not tokens:
                raise CorpusError(
                    f"set {set_id!r} doc {doc_id!r} sentence {i} has no tokens: {text!r}"
                )
            sents.append(Sentence(doc_id, i, gidx, text, tokens))
            gidx += 1
        docs.append(Document(doc_id, tuple(sents)))
    if gidx == 0:
        raise CorpusError(f"set {set_id!r} has no sentences")
    return DocumentSet(set_id, tuple(docs), tuple(references))


def rejection_reason(sentence: Sentence, cfg: FilterConfig) -> str | None:
    """Name of the first filter rule a sentence violates, or None if it passes."""
    if sentence.word_count < cfg.min_words:
        return "too_short"
    if sentence.word_count > cfg.max_words:
        return "too_long"
    stripped = sentence.text.strip()
    if cfg.reject_leading_quote and stripped[:1] in _QUOTE_CHARS:
        return "leading_quote"
    if cfg.require_terminal_period and not stripped.endswith("."):
        return "no_terminal_period"
    return None


def filter_sentences(doc_set: DocumentSet, cfg: FilterConfig) -> DocumentSet:
    """Drop non-conforming sentences and reassign global indices.

    Raises AllSentencesFiltered when nothing survives; the caller decides
    whether to skip the set or abort.
    """
    kept: list[tuple[str, list[str]]] = []
    for doc in doc_set.documents:
        texts = [
            s.text for s in doc.sentences if rejection_reason(s, cfg) is None
        ]
        kept.append((doc.doc_id, texts))
    if not any(texts for _, texts in kept):
        raise AllSentencesFiltered(doc_set.set_id)
    return build_document_set(doc_set.set_id, kept, doc_set.references)


def _parse_record(record: dict, line_no: int, seen_sets: set[str]) -> DocumentSet:
    if not isinstance(record, dict):
        raise CorpusError(f"line {line_no}: record is not an object")
    try:
        set_id = record["set_id"]
        raw_docs = record["documents"]
        references = record["references"]
    except KeyError as exc:
        raise CorpusError(f"line {line_no}: missing field {exc}") from None
    if not isinstance(set_id, str):
        raise CorpusError(f"line {line_no}: set_id must be a string")
    if set_id in seen_sets:
        raise CorpusError(f"line {line_no}: duplicate set_id {set_id!r}")
    if not isinstance(references, list) or not references:
        raise CorpusError(f"line {line_no}: set {set_id!r} has empty references")
    docs: list[tuple[str, Sequence[str]]] = []
    for raw in raw_docs:
        doc_id = raw.get("doc_id")
        if not isinstance(doc_id, str):
            raise CorpusError(f"line {line_no}: set {set_id!r} has a document without doc_id")
        if "sentences" in raw:
            texts = raw["sentences"]
        elif "text" in raw:
            texts = split_sentences(raw["text"])
        else:
            raise CorpusError(
                f"line {line_no}: doc {doc_id!r} needs 'sentences' or 'text'"
            )
        docs.append((doc_id, texts))
    try:
        ds = build_document_set(set_id, docs, references)
    except CorpusError as exc:
        raise CorpusError(f"line {line_no}: {exc}") from None
    seen_sets.add(set_id)
    return ds


def load_corpus(path: str | Path) -> list[DocumentSet]:
    """Load and validate a JSON-lines corpus; any malformed record rejects the file."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"corpus file not found: {path}")
    sets: list[DocumentSet] = []
    seen: set[str] = set()
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {line_no}: malformed JSON ({exc.msg})") from None
            sets.append(_parse_record(record, line_no, seen))
    return sets


def save_corpus(sets: Iterable[DocumentSet], path: str | Path) -> None:
    """Write document sets in the JSON-lines corpus format."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for ds in sets:
            record = {
                "set_id": ds.set_id,
                "documents": [
                    {"doc_id": d.doc_id, "sentences": [s.text for s in d.sentences]}
                    for d in ds.documents
                ],
                "references": list(ds.references),
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
