"""TF-IDF similarity and maximal-marginal-relevance extraction.

A candidate's score at step t is

    lambda * salience(s, set) - (1 - lambda) * max_e cosine(s, e)

where salience is the cosine between the sentence vector and the vector
of the whole concatenated set, and the max runs over already-extracted
sentences (0 when nothing is extracted yet). The greedy extractor takes
the argmax each step, lowest global index on ties, until the word limit
is crossed or the pool is exhausted.

IDF treats each sentence as a "document": idf(w) = ln((1+S)/(1+df)) + 1.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .corpus import DocumentSet, Sentence

SparseVector = dict[int, float]

# Similarity providers map two sparse vectors to a real number; TF-IDF
# cosine is the only built-in. External providers (neural similarity
# models etc.) plug in through the same callable signature.
SimilarityProvider = Callable[[SparseVector, SparseVector], float]


@dataclass(frozen=True)
class TfidfModel:
    vocabulary: dict[str, int]
    idf: np.ndarray
    document_frequency_basis: str = "per_sentence"


@dataclass(frozen=True)
class MmrConfig:
    lambda_: float = 0.6
    word_limit: int = 100
    tie_break: str = "lowest_global_index"

    def __post_init__(self):
        if not 0.0 <= self.lambda_ <= 1.0:
            raise ValueError(f"lambda must be in [0, 1], got {self.lambda_}")
        if self.word_limit < 1:
            raise ValueError("word_limit must be >= 1")


@dataclass
class MmrState:
    extracted: list[int] = field(default_factory=list)
    scores: np.ndarray | None = None
    ranking: list[int] | None = None
    words_used: int = 0


def fit_tfidf(sets: Sequence[DocumentSet]) -> TfidfModel:
    """Fit vocabulary and IDF statistics over all sentences of all sets."""
    df: Counter = Counter()
    n_sentences = 0
    for ds in sets:
        for sent in ds.sentences:
            n_sentences += 1
            df.update(set(sent.tokens))
    if n_sentences == 0:
        raise ValueError("cannot fit TF-IDF on an empty corpus")
    vocabulary = {tok: i for i, tok in enumerate(sorted(df))}
    idf = np.zeros(len(vocabulary))
    for tok, col in vocabulary.items():
        idf[col] = math.log((1.0 + n_sentences) / (1.0 + df[tok])) + 1.0
    return TfidfModel(vocabulary, idf)


def _vector_from_tokens(tokens: Sequence[str], model: TfidfModel) -> SparseVector:
    counts: Counter = Counter(tokens)
    vec = {}
    norm_sq = 0.0
    for tok, tf in counts.items():
        col = model.vocabulary.get(tok)
        if col is None:
            continue
        w = tf * model.idf[col]
        vec[col] = w
        norm_sq += w * w
    if norm_sq > 0.0:
        inv = 1.0 / math.sqrt(norm_sq)
        vec = {col: w * inv for col, w in vec.items()}
    return vec


def sentence_vector(sentence: Sentence, model: TfidfModel) -> SparseVector:
    """L2-normalized TF-IDF vector; all-OOV sentences map to the zero vector."""
    return _vector_from_tokens(sentence.tokens, model)


def set_vector(doc_set: DocumentSet, model: TfidfModel) -> SparseVector:
    """TF-IDF vector of the whole set (all sentences concatenated)."""
    tokens = [tok for sent in doc_set.sentences for tok in sent.tokens]
    return _vector_from_tokens(tokens, model)


def cosine(a: SparseVector, b: SparseVector) -> float:
    """Dot product over the shared support; 0 when either vector is zero."""
    if len(b) < len(a):
        a, b = b, a
    num = sum(w * b[col] for col, w in a.items() if col in b)
    norm_a = math.sqrt(sum(w * w for w in a.values()))
    norm_b = math.sqrt(sum(w * w for w in b.values()))
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    return num / (norm_a * norm_b)


def salience(sentence: Sentence, doc_set: DocumentSet, model: TfidfModel) -> float:
    return cosine(sentence_vector(sentence, model), set_vector(doc_set, model))


def redundancy(
    sentence: Sentence, extracted: Sequence[Sentence], model: TfidfModel
) -> float:
    """Max cosine against extracted sentences; 0 for an empty extraction."""
    if not extracted:
        return 0.0
    vec = sentence_vector(sentence, model)
    return max(cosine(vec, sentence_vector(e, model)) for e in extracted)


def combined_similarity(
    a: SparseVector,
    b: SparseVector,
    providers: Sequence[tuple[SimilarityProvider, float]],
) -> float:
    """Weighted combination of similarity providers; weights must sum to 1."""
    if not providers:
        raise ValueError("need at least one similarity provider")
    total = sum(w for _, w in providers)
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"provider weights must sum to 1, got {total}")
    return sum(w * provider(a, b) for provider, w in providers)


class MmrScorer:
    """Per-set MMR state with incremental redundancy updates.

    Vectors and salience are precomputed once; `advance` folds a newly
    extracted sentence into the running max-redundancy in O(n).
    """

    def __init__(
        self,
        doc_set: DocumentSet,
        model: TfidfModel,
        cfg: MmrConfig,
        similarity: SimilarityProvider = cosine,
    ):
        self.doc_set = doc_set
        self.cfg = cfg
        self.sentences = doc_set.sentences
        self.n = len(self.sentences)
        self.vectors = [sentence_vector(s, model) for s in self.sentences]
        sv = set_vector(doc_set, model)
        self.similarity = similarity
        self.salience = np.array([similarity(v, sv) for v in self.vectors])
        self.word_counts = np.array([s.word_count for s in self.sentences])
        self.extracted: list[int] = []
        self.words_used = 0
        self._max_red = np.zeros(self.n)

    def fresh(self) -> "MmrScorer":
        """Copy with shared vectors/salience but a cleared extraction state."""
        twin = object.__new__(MmrScorer)
        twin.__dict__.update(self.__dict__)
        twin.extracted = []
        twin.words_used = 0
        twin._max_red = np.zeros(self.n)
        return twin

    def advance(self, j: int) -> None:
        """Mark sentence j as extracted and refresh the redundancy term."""
        if j in self.extracted:
            raise ValueError(f"sentence {j} already extracted")
        vj = self.vectors[j]
        for i in range(self.n):
            sim = self.similarity(self.vectors[i], vj)
            if sim > self._max_red[i]:
                self._max_red[i] = sim
        self.extracted.append(j)
        self.words_used += int(self.word_counts[j])

    def scores(self) -> np.ndarray:
        """m_t over all sentences; extracted entries are -inf."""
        lam = self.cfg.lambda_
        m = lam * self.salience - (1.0 - lam) * self._max_red
        m[self.extracted] = -np.inf
        return m

    def ranking(self) -> list[int]:
        """Indices sorted by score descending, lowest index on ties."""
        m = self.scores()
        return sorted(range(self.n), key=lambda j: (-m[j], j))

    def state(self) -> MmrState:
        return MmrState(
            extracted=list(self.extracted),
            scores=self.scores(),
            ranking=self.ranking(),
            words_used=self.words_used,
        )


def mmr_scores(
    doc_set: DocumentSet, state: MmrState, cfg: MmrConfig, model: TfidfModel
) -> MmrState:
    """Recompute scores and ranking for the given extraction history."""
    scorer = MmrScorer(doc_set, model, cfg)
    for j in state.extracted:
        scorer.advance(j)
    return scorer.state()


def mmr_extract(
    doc_set: DocumentSet, cfg: MmrConfig, model: TfidfModel
) -> list[int]:
    """Greedy MMR extraction until the word limit is crossed.

    The sentence that crosses the limit is included; the scoring side
    re-truncates to the word limit anyway.
    """
    scorer = MmrScorer(doc_set, model, cfg)
    if scorer.n == 0:
        raise ValueError(f"set {doc_set.set_id!r} has no candidate sentences")
    order: list[int] = []
    while len(order) < scorer.n and scorer.words_used < cfg.word_limit:
        m = scorer.scores()
        best = int(np.argmax(m))
        order.append(best)
        scorer.advance(best)
    return order
