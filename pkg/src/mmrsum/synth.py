"""Deterministic synthetic corpora for desk-scale experiments.

Each generated set plants a handful of designated sentences whose
concatenation becomes the reference summary. Planted sentences carry
shared marker words plus extra topic words, so that (a) they are the
most set-salient sentences by TF-IDF and (b) a learned extractor can
recognize them lexically on held-out sets. Exact duplicates are injected
across documents to emulate the redundancy of real multi-document input.
"""

from __future__ import annotations

import random
from typing import Sequence

from .corpus import DocumentSet, Sentence, build_document_set

# Markers appear only in planted sentences, corpus-wide.
MARKER_WORDS = ("beacon", "signal", "flare", "lantern", "crest", "ember")

_FILLER_WORDS = (
    "alpha", "bravo", "delta", "echo", "foxtrot", "golf", "hotel", "india",
    "juliet", "kilo", "lima", "mike", "november", "oscar", "papa", "quebec",
    "romeo", "sierra", "tango", "uniform", "victor", "whiskey", "xray",
    "yankee", "zulu", "amber", "cobalt", "ivory", "jade", "onyx",
)

_TOPICS_PER_SET = 8
_PLANTED_TOPIC_WORDS = 4
_PLANTED_MARKER_WORDS = 3
_REGULAR_TOPIC_WORDS = 2
_SENTENCE_WORDS = 10


def is_planted(sentence: Sentence) -> bool:
    """Whether a synthetic sentence is one of the designated reference sentences."""
    return any(tok in MARKER_WORDS for tok in sentence.tokens)


def planted_indices(doc_set: DocumentSet) -> list[int]:
    """Global indices of planted sentences (duplicates included)."""
    return [s.global_index for s in doc_set.sentences if is_planted(s)]


def _make_sentence(rng: random.Random, words: list[str]) -> str:
    rng.shuffle(words)
    return " ".join(words) + "."


def synth_corpus(
    seed: int,
    n_sets: int,
    docs_per_set: int,
    sents_per_doc: int,
    planted_per_set: int,
    duplicate_rate: float,
) -> list[DocumentSet]:
    """Generate `n_sets` document sets, fully determined by `seed`.

    `duplicate_rate` is the fraction of sentence slots rewritten as exact
    copies of other sentences in the set; copies alternate between planted
    and regular sources so redundancy hits the salient content too.
    Planted sentences themselves are never overwritten.
    """
    if min(n_sets, docs_per_set, sents_per_doc, planted_per_set) < 1:
        raise ValueError("all counts must be >= 1")
    if not 0.0 <= duplicate_rate <= 1.0:
        raise ValueError(f"duplicate_rate must be in [0, 1], got {duplicate_rate}")
    total = docs_per_set * sents_per_doc
    if planted_per_set > total:
        raise ValueError(
            f"planted_per_set={planted_per_set} exceeds {total} sentences per set"
        )

    rng = random.Random(seed)
    sets = []
    for si in range(n_sets):
        topics = [f"topic{si}{chr(ord('a') + t)}" for t in range(_TOPICS_PER_SET)]
        noise_counter = 0

        def fresh_noise(k: int) -> list[str]:
            nonlocal noise_counter
            out = [f"w{si}n{noise_counter + i}" for i in range(k)]
            noise_counter += k
            return out

        slots = [(d, s) for d in range(docs_per_set) for s in range(sents_per_doc)]
        planted_slots = sorted(rng.sample(slots, planted_per_set))

        # Each planted sentence leans on its own slice of the topic and
        # marker pools, so planted sentences are individually salient but
        # mutually non-redundant.
        texts: dict[tuple[int, int], str] = {}
        for pi, slot in enumerate(planted_slots):
            t_off = (pi * _PLANTED_TOPIC_WORDS) % _TOPICS_PER_SET
            m_off = (pi * _PLANTED_MARKER_WORDS) % len(MARKER_WORDS)
            topic_slice = [
                topics[(t_off + i) % _TOPICS_PER_SET]
                for i in range(_PLANTED_TOPIC_WORDS)
            ]
            marker_slice = [
                MARKER_WORDS[(m_off + i) % len(MARKER_WORDS)]
                for i in range(_PLANTED_MARKER_WORDS)
            ]
            words = topic_slice + marker_slice + rng.sample(_FILLER_WORDS, 2) + fresh_noise(1)
            texts[slot] = _make_sentence(rng, words)
        for slot in slots:
            if slot in texts:
                continue
            words = (
                rng.sample(topics, _REGULAR_TOPIC_WORDS)
                + rng.sample(_FILLER_WORDS, _SENTENCE_WORDS - _REGULAR_TOPIC_WORDS - 3)
                + fresh_noise(3)
            )
            texts[slot] = _make_sentence(rng, words)

        # Reference reads planted sentences in document order.
        planted_texts = [texts[s] for s in sorted(planted_slots)]

        n_dups = round(duplicate_rate * total)
        replaceable = [s for s in slots if s not in planted_slots]
        rng.shuffle(replaceable)
        planted_sources = sorted(planted_slots)
        regular_sources = [s for s in sorted(texts) if s not in planted_slots]
        for di in range(min(n_dups, len(replaceable) - 1)):
            target = replaceable[di]
            if di % 2 == 0:
                source = planted_sources[(di // 2) % len(planted_sources)]
            else:
                pool = [s for s in regular_sources if s != target and s not in replaceable[:di + 1]]
                if not pool:
                    continue
                source = pool[(di // 2) % len(pool)]
            texts[target] = texts[source]

        docs = []
        for d in range(docs_per_set):
            docs.append(
                (f"set{si:03d}d{d}", [texts[(d, s)] for s in range(sents_per_doc)])
            )
        reference = " ".join(planted_texts)
        sets.append(build_document_set(f"set{si:03d}", docs, [reference]))
    return sets


def split_train_val(
    sets: Sequence[DocumentSet], n_val: int
) -> tuple[list[DocumentSet], list[DocumentSet]]:
    """Last `n_val` sets become the validation split."""
    if not 0 < n_val < len(sets):
        raise ValueError(f"need 0 < n_val < {len(sets)}, got {n_val}")
    return list(sets[:-n_val]), list(sets[-n_val:])
