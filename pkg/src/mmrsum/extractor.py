"""Two-hop pointer extraction with MMR guidance.

Per decode step: the summary-so-far is encoded into z_t by an LSTM over
the extracted rows; a glimpse attention over all rows (STOP included)
produces the state vector g_t; a second attention scores each row as an
extraction logit. Already-extracted rows are always -inf.

Guidance variants rewire this pipeline around the current MMR scores m_t
and ranking M_t:

  vanilla    logits unchanged
  hard_cut   rows outside the top-K of M_t masked to -inf (STOP exempt)
  hard_comb  live rows blended: beta * logit + (1 - beta) * FF(m), top-K mask
  soft_comb  same blend, no mask
  soft_attn  mu = softmax(FF(m)) over live sentence rows rescales the rows
             themselves (A'_j = mu_j A_j) before both attention hops;
             the STOP row is never rescaled
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Literal, Sequence

import torch
from torch import nn

from .corpus import DocumentSet
from .encoder import ActionMatrix, Dims, seeded_uniform_init_
from .mmr import MmrConfig, MmrScorer, TfidfModel

Variant = Literal["vanilla", "hard_cut", "hard_comb", "soft_comb", "soft_attn"]
VARIANTS = ("vanilla", "hard_cut", "hard_comb", "soft_comb", "soft_attn")
GUIDED_VARIANTS = ("hard_cut", "hard_comb", "soft_comb", "soft_attn")

FF_HIDDEN = 64
NEG_INF = float("-inf")


class PointerExtractor(nn.Module):
    """Glimpse + pointer parameters, the summary encoder, and the MMR FF."""

    def __init__(self, dims: Dims, variant: Variant = "vanilla",
                 beta: float = 0.5, k: int | None = None):
        super().__init__()
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {variant!r}")
        if not 0.0 <= beta <= 1.0:
            raise ValueError(f"beta must be in [0, 1], got {beta}")
        if k is not None and k < 1:
            raise ValueError(f"K must be >= 1 or None for no cutoff, got {k}")
        d = dims.ctx_dim
        self.dims = dims
        self.variant = variant
        self.beta = beta
        self.k = k  # None means no cutoff (K = infinity)
        self.w1 = nn.Parameter(torch.zeros(d, d, dtype=torch.float64))
        self.w2 = nn.Parameter(torch.zeros(d, d, dtype=torch.float64))
        self.v1 = nn.Parameter(torch.zeros(d, dtype=torch.float64))
        self.w3 = nn.Parameter(torch.zeros(d, d, dtype=torch.float64))
        self.w4 = nn.Parameter(torch.zeros(d, d, dtype=torch.float64))
        self.v2 = nn.Parameter(torch.zeros(d, dtype=torch.float64))
        self.summary_cell = nn.LSTMCell(d, d).double()
        self.summary_h0 = nn.Parameter(torch.zeros(d, dtype=torch.float64))
        self.summary_c0 = nn.Parameter(torch.zeros(d, dtype=torch.float64))
        self.ff = nn.Sequential(
            nn.Linear(1, FF_HIDDEN), nn.Tanh(), nn.Linear(FF_HIDDEN, 1)
        ).double()

    def ff_scores(self, values: torch.Tensor) -> torch.Tensor:
        """Elementwise two-layer feed-forward transform of scalar MMR scores."""
        return self.ff(values.reshape(-1, 1)).reshape(-1)


def init_extractor(seed: int, dims: Dims, variant: Variant = "vanilla",
                   beta: float = 0.5, k: int | None = None) -> PointerExtractor:
    ext = PointerExtractor(dims, variant, beta, k)
    gen = torch.Generator()
    gen.manual_seed(seed)
    seeded_uniform_init_(ext, gen)
    return ext


@dataclass
class DecodeState:
    extracted: list[int] = field(default_factory=list)
    words_used: int = 0
    z: torch.Tensor | None = None
    cell: tuple[torch.Tensor, torch.Tensor] | None = None
    alpha: torch.Tensor | None = None
    g: torch.Tensor | None = None
    mu: torch.Tensor | None = None
    logits: torch.Tensor | None = None


def initial_state(params: PointerExtractor) -> DecodeState:
    h = params.summary_h0
    c = params.summary_c0
    return DecodeState(z=h, cell=(h, c))


def summary_repr(
    extracted_rows: Sequence[torch.Tensor], params: PointerExtractor
) -> torch.Tensor:
    """Summary vector z_t from scratch; empty extraction gives the trained init."""
    h = params.summary_h0.unsqueeze(0)
    c = params.summary_c0.unsqueeze(0)
    for row in extracted_rows:
        h, c = params.summary_cell(row.unsqueeze(0), (h, c))
    return h.squeeze(0)


def glimpse(
    rows: torch.Tensor, z: torch.Tensor, params: PointerExtractor
) -> tuple[torch.Tensor, torch.Tensor]:
    """Attention over all rows; returns (alpha, g)."""
    projected = rows @ params.w1.T  # W1 A_j, reused for the context sum
    scores = torch.tanh(projected + params.w2 @ z) @ params.v1
    alpha = torch.softmax(scores, dim=0)
    g = alpha @ projected
    return alpha, g


def extraction_logits(
    rows: torch.Tensor,
    g: torch.Tensor,
    extracted: Sequence[int],
    params: PointerExtractor,
) -> torch.Tensor:
    """Pointer logits over all rows, -inf at already-extracted rows."""
    p = torch.tanh(rows @ params.w3.T + params.w4 @ g) @ params.v2
    if extracted:
        mask = torch.zeros(len(p), dtype=torch.bool)
        mask[list(extracted)] = True
        p = p.masked_fill(mask, NEG_INF)
    return p


def hard_cut_allowed(
    ranking: Sequence[int], k: int | None, extracted: Sequence[int]
) -> set[int]:
    """Sentence rows left unmasked by the K cutoff: top-K of M_t minus E_t."""
    if k is None:
        top = set(ranking)
    else:
        top = set(ranking[:k])
    return top - set(extracted)


def apply_guidance_logits(
    p: torch.Tensor,
    m: torch.Tensor | None,
    ranking: Sequence[int] | None,
    extracted: Sequence[int],
    stop_index: int,
    params: PointerExtractor,
) -> torch.Tensor:
    """Logit-space guidance for vanilla/hard_cut/hard_comb/soft_comb.

    The STOP row is never masked or blended, so the episode can always
    terminate.
    """
    variant = params.variant
    if variant == "vanilla":
        return p
    if m is None or ranking is None:
        raise ValueError(f"variant {variant!r} requires MMR scores")
    extracted_set = set(extracted)
    if variant in ("hard_cut", "hard_comb"):
        allowed = hard_cut_allowed(ranking, params.k, extracted)
    else:
        allowed = set(range(stop_index)) - extracted_set
    out = p.clone()
    if variant in ("hard_comb", "soft_comb"):
        live = sorted(allowed)
        if live:
            idx = torch.tensor(live, dtype=torch.long)
            ff = params.ff_scores(m[idx])
            out[idx] = params.beta * p[idx] + (1.0 - params.beta) * ff
    if variant in ("hard_cut", "hard_comb"):
        masked = [
            j for j in range(stop_index)
            if j not in allowed and j not in extracted_set
        ]
        if masked:
            out[torch.tensor(masked, dtype=torch.long)] = NEG_INF
    return out


def soft_attention_rows(
    A: ActionMatrix,
    m: torch.Tensor,
    extracted: Sequence[int],
    params: PointerExtractor,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Rescale sentence rows by mu = softmax(FF(m)) over live rows.

    Extracted rows get mu = 0 (their MMR score is -inf); the STOP row
    keeps its original representation. Returns (rows', mu).
    """
    n = A.stop_index
    live = [j for j in range(n) if j not in set(extracted)]
    if not live:
        raise ValueError("soft attention needs at least one live sentence row")
    idx = torch.tensor(live, dtype=torch.long)
    mu_live = torch.softmax(params.ff_scores(m[idx]), dim=0)
    mu = torch.zeros(n, dtype=mu_live.dtype)
    mu = mu.index_put((idx,), mu_live)
    rows = torch.cat([A.rows[:n] * mu.unsqueeze(1), A.rows[n:]], dim=0)
    return rows, mu


def _first_argmax(values: torch.Tensor) -> int:
    top = values.max()
    return int((values == top).nonzero(as_tuple=False)[0, 0])


def step_logits(
    A: ActionMatrix,
    state: DecodeState,
    params: PointerExtractor,
    m: torch.Tensor | None = None,
    ranking: Sequence[int] | None = None,
    allow_stop: bool = True,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor | None]:
    """Guided logits for the current state: (logits, alpha, g, mu)."""
    z = state.z
    mu = None
    if params.variant == "soft_attn":
        if m is None:
            raise ValueError("soft_attn requires MMR scores")
        rows, mu = soft_attention_rows(A, m, state.extracted, params)
        alpha, g = glimpse(rows, z, params)
        logits = extraction_logits(rows, g, state.extracted, params)
    else:
        alpha, g = glimpse(A.rows, z, params)
        p = extraction_logits(A.rows, g, state.extracted, params)
        logits = apply_guidance_logits(
            p, m, ranking, state.extracted, A.stop_index, params
        )
    if not allow_stop:
        logits = logits.clone()
        logits[A.stop_index] = NEG_INF
    assert bool(torch.isfinite(logits).any()), "no selectable action: all rows masked"
    return logits, alpha, g, mu


def advance_state(
    A: ActionMatrix,
    state: DecodeState,
    action: int,
    params: PointerExtractor,
    word_counts: Sequence[int] | None = None,
) -> DecodeState:
    """Fold a chosen action into the decode state (no-op fields for STOP)."""
    new_state = replace(state, extracted=list(state.extracted))
    if action != A.stop_index:
        new_state.extracted.append(action)
        if word_counts is not None:
            new_state.words_used = state.words_used + int(word_counts[action])
        h, c = state.cell
        h2, c2 = params.summary_cell(
            A.rows[action].unsqueeze(0), (h.unsqueeze(0), c.unsqueeze(0))
        )
        new_state.cell = (h2.squeeze(0), c2.squeeze(0))
        new_state.z = new_state.cell[0]
    return new_state


def decode_step(
    A: ActionMatrix,
    state: DecodeState,
    params: PointerExtractor,
    m: torch.Tensor | None = None,
    ranking: Sequence[int] | None = None,
    mode: Literal["greedy", "sample"] = "greedy",
    rng: torch.Generator | None = None,
    allow_stop: bool = True,
    word_counts: Sequence[int] | None = None,
) -> tuple[int, DecodeState, torch.Tensor]:
    """One extraction decision; returns (action, next state, log-prob).

    `m`/`ranking` must reflect the current extraction set for guided
    variants. `word_counts` lets the state track the word budget.
    """
    logits, alpha, g, mu = step_logits(A, state, params, m, ranking, allow_stop)
    log_probs = torch.log_softmax(logits, dim=0)
    if mode == "greedy":
        action = _first_argmax(logits)
    elif mode == "sample":
        live = torch.isfinite(logits).nonzero(as_tuple=False).reshape(-1)
        probs = torch.softmax(logits[live], dim=0)
        pick = torch.multinomial(probs, 1, generator=rng)
        action = int(live[pick])
    else:
        raise ValueError(f"unknown mode {mode!r}")

    new_state = advance_state(A, state, action, params, word_counts)
    new_state.alpha = alpha
    new_state.g = g
    new_state.mu = mu
    new_state.logits = logits
    return action, new_state, log_probs[action]


def episode_log_prob(
    doc_set: DocumentSet,
    A: ActionMatrix,
    params: PointerExtractor,
    actions: Sequence[int],
    mmr_model: TfidfModel | None = None,
    cfg: MmrConfig = MmrConfig(),
    scorer: MmrScorer | None = None,
) -> torch.Tensor:
    """Log-probability of a fixed action sequence under the policy.

    Teacher-forced evaluation: MMR guidance evolves along the given
    actions exactly as it would during decoding.
    """
    if params.variant == "vanilla":
        scorer = None
    elif scorer is not None:
        scorer = scorer.fresh()
    else:
        if mmr_model is None:
            raise ValueError(f"variant {params.variant!r} requires a TF-IDF model")
        scorer = MmrScorer(doc_set, mmr_model, cfg)
    state = initial_state(params)
    total = torch.zeros((), dtype=torch.float64)
    for action in actions:
        m = ranking = None
        if scorer is not None:
            m = torch.from_numpy(scorer.scores())
            ranking = scorer.ranking()
        logits, _, _, _ = step_logits(A, state, params, m, ranking)
        total = total + torch.log_softmax(logits, dim=0)[action]
        state = advance_state(A, state, action, params)
        if action != A.stop_index and scorer is not None:
            scorer.advance(action)
    return total


@dataclass
class EpisodeResult:
    extracted: list[int]
    stopped: bool
    log_probs: list[torch.Tensor]
    states: list[DecodeState]


def run_episode(
    doc_set: DocumentSet,
    A: ActionMatrix,
    params: PointerExtractor,
    mmr_model: TfidfModel | None,
    cfg: MmrConfig,
    mode: Literal["greedy", "sample"] = "greedy",
    rng: torch.Generator | None = None,
    allow_stop: bool = True,
    scorer: MmrScorer | None = None,
) -> EpisodeResult:
    """Decode until STOP or the word limit; MMR scores refresh every step.

    A prebuilt `scorer` (vectors already computed) is reset and reused when
    given; otherwise one is fitted from `mmr_model`.
    """
    n = len(doc_set.sentences)
    if n == 0:
        raise ValueError(f"set {doc_set.set_id!r} has no candidate sentences")
    if params.variant == "vanilla":
        scorer = None
    elif scorer is not None:
        scorer = scorer.fresh()
    else:
        if mmr_model is None:
            raise ValueError(f"variant {params.variant!r} requires a TF-IDF model")
        scorer = MmrScorer(doc_set, mmr_model, cfg)
    word_counts = [s.word_count for s in doc_set.sentences]
    state = initial_state(params)
    log_probs: list[torch.Tensor] = []
    states: list[DecodeState] = []
    stopped = False
    while state.words_used < cfg.word_limit and len(state.extracted) < n:
        m = ranking = None
        if scorer is not None:
            m = torch.from_numpy(scorer.scores())
            ranking = scorer.ranking()
        action, state, logp = decode_step(
            A, state, params, m=m, ranking=ranking, mode=mode,
            rng=rng, allow_stop=allow_stop, word_counts=word_counts,
        )
        log_probs.append(logp)
        states.append(state)
        if action == A.stop_index:
            stopped = True
            break
        if scorer is not None:
            scorer.advance(action)
    return EpisodeResult(
        extracted=list(state.extracted),
        stopped=stopped,
        log_probs=log_probs,
        states=states,
    )


def extract_summary(
    doc_set: DocumentSet,
    A: ActionMatrix,
    params: PointerExtractor,
    mmr_model: TfidfModel | None,
    cfg: MmrConfig,
    mode: Literal["greedy", "sample"] = "greedy",
    rng: torch.Generator | None = None,
    allow_stop: bool = True,
    scorer: MmrScorer | None = None,
) -> list[int]:
    """Ordered global sentence indices of the decoded summary."""
    with torch.no_grad():
        result = run_episode(
            doc_set, A, params, mmr_model, cfg, mode=mode, rng=rng,
            allow_stop=allow_stop, scorer=scorer,
        )
    return result.extracted
