"""Exact ROUGE-1/2/SU4/L scoring.

Counting follows the classic evaluation configuration for 100-word
summaries: Porter stemming, no stopword removal, truncation of both
candidate and references to the first `length_limit_words` tokens,
skip-bigrams with gap <= 4 plus unigrams for SU4, and arithmetic
averaging of per-reference P/R/F1 across multiple references.

These scorers double as the reinforcement-learning reward functions, so
they are pure and cache only immutable token statistics.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Literal, Sequence

from .corpus import tokenize
from .stem import stem


@dataclass(frozen=True)
class RougeConfig:
    stemming: bool = True
    length_limit_words: int | None = 100
    su_max_gap: int = 4
    su_include_unigrams: bool = True
    multi_ref_mode: Literal["average", "best"] = "average"

    def __post_init__(self):
        if self.su_max_gap < 0:
            raise ValueError("su_max_gap must be >= 0")
        if self.length_limit_words is not None and self.length_limit_words < 1:
            raise ValueError("length_limit_words must be >= 1 when present")
        if self.multi_ref_mode not in ("average", "best"):
            raise ValueError(f"unknown multi_ref_mode {self.multi_ref_mode!r}")


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float

    @staticmethod
    def from_counts(overlap: int, candidate_total: int, reference_total: int) -> "RougeScore":
        p = overlap / candidate_total if candidate_total > 0 else 0.0
        r = overlap / reference_total if reference_total > 0 else 0.0
        f = 2.0 * p * r / (p + r) if p + r > 0 else 0.0
        return RougeScore(p, r, f)


def preprocess(text: str, cfg: RougeConfig) -> list[str]:
    """Tokenize, optionally stem, and truncate to the word limit."""
    tokens = list(tokenize(text))
    if cfg.stemming:
        tokens = [stem(t) for t in tokens]
    if cfg.length_limit_words is not None:
        tokens = tokens[: cfg.length_limit_words]
    return tokens


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _su_counts(tokens: Sequence[str], max_gap: int, include_unigrams: bool) -> Counter:
    """Skip-bigrams with at most `max_gap` intervening tokens, plus unigrams.

    Units are tuples, so 1-tuples (unigrams) never collide with pairs.
    """
    units: Counter = Counter()
    for i in range(len(tokens)):
        if include_unigrams:
            units[(tokens[i],)] += 1
        for j in range(i + 1, min(i + 2 + max_gap, len(tokens))):
            units[(tokens[i], tokens[j])] += 1
    return units


def _clipped_overlap(a: Counter, b: Counter) -> int:
    if len(b) < len(a):
        a, b = b, a
    return sum(min(count, b[unit]) for unit, count in a.items())


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        curr = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                curr.append(prev[j - 1] + 1)
            else:
                curr.append(max(prev[j], curr[j - 1]))
        prev = curr
    return prev[-1]


def _aggregate(scores: list[RougeScore], mode: str) -> RougeScore:
    if mode == "best":
        return max(scores, key=lambda s: s.f1)
    n = len(scores)
    return RougeScore(
        sum(s.precision for s in scores) / n,
        sum(s.recall for s in scores) / n,
        sum(s.f1 for s in scores) / n,
    )


def _score_units(
    candidate: str,
    references: Sequence[str],
    cfg: RougeConfig,
    counts,
) -> RougeScore:
    if not references:
        raise ValueError("references must be non-empty")
    cand_counts = counts(preprocess(candidate, cfg))
    cand_total = sum(cand_counts.values())
    per_ref = []
    for ref in references:
        ref_counts = counts(preprocess(ref, cfg))
        overlap = _clipped_overlap(cand_counts, ref_counts)
        per_ref.append(
            RougeScore.from_counts(overlap, cand_total, sum(ref_counts.values()))
        )
    return _aggregate(per_ref, cfg.multi_ref_mode)


def rouge_n(
    candidate: str, references: Sequence[str], n: int, cfg: RougeConfig
) -> RougeScore:
    """Clipped n-gram overlap P/R/F1 against one or more references."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return _score_units(candidate, references, cfg, lambda toks: _ngram_counts(toks, n))


def rouge_su(candidate: str, references: Sequence[str], cfg: RougeConfig) -> RougeScore:
    """Skip-bigram (+ unigram) overlap P/R/F1."""
    return _score_units(
        candidate,
        references,
        cfg,
        lambda toks: _su_counts(toks, cfg.su_max_gap, cfg.su_include_unigrams),
    )


def rouge_l(candidate: str, references: Sequence[str], cfg: RougeConfig) -> RougeScore:
    """Longest-common-subsequence P/R/F1."""
    if not references:
        raise ValueError("references must be non-empty")
    cand = preprocess(candidate, cfg)
    per_ref = []
    for ref in references:
        ref_tokens = preprocess(ref, cfg)
        ell = _lcs_length(cand, ref_tokens)
        per_ref.append(RougeScore.from_counts(ell, len(cand), len(ref_tokens)))
    return _aggregate(per_ref, cfg.multi_ref_mode)


METRIC_NAMES = ("rouge-1", "rouge-2", "rouge-su4", "rouge-l")


def score_all(
    candidate: str, references: Sequence[str], cfg: RougeConfig
) -> dict[str, RougeScore]:
    """R-1, R-2, R-SU4, and R-L for one candidate."""
    return {
        "rouge-1": rouge_n(candidate, references, 1, cfg),
        "rouge-2": rouge_n(candidate, references, 2, cfg),
        "rouge-su4": rouge_su(candidate, references, cfg),
        "rouge-l": rouge_l(candidate, references, cfg),
    }
