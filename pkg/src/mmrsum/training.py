"""Episode rollouts, rewards, advantage actor-critic updates, and training.

Rewards follow the extraction MDP: each extracted sentence earns the
ROUGE-L F1 of that sentence alone against the references, and the STOP
step earns the ROUGE-1 F1 of the assembled summary (truncated to the
scoring word limit). The policy gradient weights log-probabilities by
(return - critic baseline); the critic regresses returns from detached
sentence representations so its updates never touch the policy.
"""

from __future__ import annotations

import copy
import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import torch
from torch import nn

from .corpus import DocumentSet
from .encoder import ActionMatrix, Dims, HierarchicalEncoder, Vocab, build_vocab, init_encoder, seeded_uniform_init_
from .extractor import (
    PointerExtractor,
    Variant,
    extract_summary,
    init_extractor,
    run_episode,
)
from .mmr import MmrConfig, MmrScorer, TfidfModel, fit_tfidf
from .rouge import RougeConfig, rouge_l, rouge_n

VALUE_HIDDEN = 64


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float | None = None  # None: 5e-4 for soft_attn, 1e-3 otherwise
    epochs: int = 10000
    eval_every: int = 10
    patience: int = 30
    gamma: float = 0.95
    grad_clip_norm: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate is not None and self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must be in (0, 1]")


def default_learning_rate(variant: Variant) -> float:
    return 5e-4 if variant == "soft_attn" else 1e-3


@dataclass
class RewardTrace:
    """Per-episode rewards and the action log-probabilities behind them."""

    step_rewards: list[float]
    final_reward: float
    actions: list[int]
    log_probs: list[torch.Tensor]
    stopped: bool

    @property
    def T(self) -> int:
        return len(self.actions)

    @property
    def mean_reward(self) -> float:
        return (sum(self.step_rewards) + self.final_reward) / max(self.T, 1)


def summary_text(doc_set: DocumentSet, indices: Sequence[int]) -> str:
    sentences = doc_set.sentences
    return " ".join(sentences[j].text for j in indices)


class RewardCache:
    """Per-set reward memoization.

    Each sentence's step reward (ROUGE-L F1 against the references) is a
    constant of the set, so it is computed once. The summary-level reward
    depends on the extraction and stays uncached.
    """

    def __init__(self, doc_set: DocumentSet, rouge_cfg: RougeConfig):
        self.doc_set = doc_set
        self.rouge_cfg = rouge_cfg
        self._steps: dict[int, float] = {}

    def step_reward(self, j: int) -> float:
        if j not in self._steps:
            self._steps[j] = rouge_l(
                self.doc_set.sentences[j].text, self.doc_set.references, self.rouge_cfg
            ).f1
        return self._steps[j]

    def final_reward(self, indices: Sequence[int]) -> float:
        return rouge_n(
            summary_text(self.doc_set, indices), self.doc_set.references, 1,
            self.rouge_cfg,
        ).f1


def rollout(
    doc_set: DocumentSet,
    A: ActionMatrix,
    extractor: PointerExtractor,
    mmr_model: TfidfModel | None,
    mmr_cfg: MmrConfig,
    rouge_cfg: RougeConfig,
    rng: torch.Generator,
    scorer: MmrScorer | None = None,
    reward_cache: RewardCache | None = None,
) -> RewardTrace:
    """Sample one episode and attach its rewards."""
    episode = run_episode(
        doc_set, A, extractor, mmr_model, mmr_cfg, mode="sample", rng=rng,
        scorer=scorer,
    )
    cache = reward_cache or RewardCache(doc_set, rouge_cfg)
    step_rewards = [cache.step_reward(j) for j in episode.extracted]
    final = cache.final_reward(episode.extracted)
    actions = list(episode.extracted)
    if episode.stopped:
        actions.append(A.stop_index)
    return RewardTrace(
        step_rewards=step_rewards,
        final_reward=final,
        actions=actions,
        log_probs=episode.log_probs,
        stopped=episode.stopped,
    )


def discounted_returns(rewards: Sequence[float], gamma: float) -> list[float]:
    out = [0.0] * len(rewards)
    acc = 0.0
    for i in range(len(rewards) - 1, -1, -1):
        acc = rewards[i] + gamma * acc
        out[i] = acc
    return out


def returns(trace: RewardTrace, gamma: float) -> list[float]:
    """Discounted return per action.

    When the episode ended by word limit instead of STOP, the summary
    reward still arrives as a terminal transition after the last action.
    """
    seq = list(trace.step_rewards) + [trace.final_reward]
    full = discounted_returns(seq, gamma)
    return full if trace.stopped else full[:-1]


class Critic(nn.Module):
    """Value network: glimpse over (detached) sentence rows, scalar head.

    Mirrors the policy's consumption of the action matrix with its own
    parameters: a summary LSTM over the extracted prefix and one
    attention hop produce a state vector, mapped to a value.
    """

    def __init__(self, dims: Dims):
        super().__init__()
        d = dims.ctx_dim
        self.w1 = nn.Parameter(torch.zeros(d, d, dtype=torch.float64))
        self.w2 = nn.Parameter(torch.zeros(d, d, dtype=torch.float64))
        self.v1 = nn.Parameter(torch.zeros(d, dtype=torch.float64))
        self.cell = nn.LSTMCell(d, d).double()
        self.h0 = nn.Parameter(torch.zeros(d, dtype=torch.float64))
        self.c0 = nn.Parameter(torch.zeros(d, dtype=torch.float64))
        self.head = nn.Sequential(
            nn.Linear(d, VALUE_HIDDEN), nn.Tanh(), nn.Linear(VALUE_HIDDEN, 1)
        ).double()

    def values(self, A: ActionMatrix, actions: Sequence[int]) -> torch.Tensor:
        """One value per decision step, including the STOP step if present."""
        rows = A.rows.detach()
        h = self.h0.unsqueeze(0)
        c = self.c0.unsqueeze(0)
        hiddens = [h.squeeze(0)]
        for action in actions[:-1]:
            if action != A.stop_index:
                h, c = self.cell(rows[action].unsqueeze(0), (h, c))
            hiddens.append(h.squeeze(0))
        H = torch.stack(hiddens)  # (T, d): summary state before each step
        scores = torch.tanh(rows @ self.w1.T + (H @ self.w2.T).unsqueeze(1)) @ self.v1
        alpha = torch.softmax(scores, dim=1)  # (T, n+1)
        g = alpha @ rows
        return self.head(g).squeeze(-1)


def init_critic(seed: int, dims: Dims) -> Critic:
    critic = Critic(dims)
    gen = torch.Generator()
    gen.manual_seed(seed)
    seeded_uniform_init_(critic, gen)
    return critic


@dataclass
class UpdateDiagnostics:
    policy_loss: float
    critic_loss: float
    mean_reward: float


def policy_update(
    batch: Sequence[tuple[RewardTrace, ActionMatrix]],
    critic: Critic,
    policy_optimizer: torch.optim.Optimizer,
    critic_optimizer: torch.optim.Optimizer,
    policy_parameters: Sequence[torch.Tensor],
    cfg: TrainConfig,
) -> UpdateDiagnostics:
    """One advantage-actor-critic step over a batch of episodes."""
    if not batch:
        raise ValueError("policy_update needs a non-empty batch")
    policy_terms = []
    critic_terms = []
    for trace, A in batch:
        G = torch.tensor(returns(trace, cfg.gamma), dtype=torch.float64)
        V = critic.values(A, trace.actions)
        advantage = G - V.detach()
        log_probs = torch.stack(trace.log_probs)
        policy_terms.append(-(advantage * log_probs).sum())
        critic_terms.append(((V - G) ** 2).mean())
    policy_loss = torch.stack(policy_terms).mean()
    critic_loss = torch.stack(critic_terms).mean()
    if not (torch.isfinite(policy_loss) and torch.isfinite(critic_loss)):
        raise RuntimeError(
            f"non-finite loss: policy={policy_loss.item()} critic={critic_loss.item()}"
        )

    policy_optimizer.zero_grad()
    policy_loss.backward()
    nn.utils.clip_grad_norm_(policy_parameters, cfg.grad_clip_norm)
    policy_optimizer.step()

    critic_optimizer.zero_grad()
    critic_loss.backward()
    nn.utils.clip_grad_norm_(list(critic.parameters()), cfg.grad_clip_norm)
    critic_optimizer.step()

    mean_reward = sum(tr.mean_reward for tr, _ in batch) / len(batch)
    return UpdateDiagnostics(
        policy_loss=policy_loss.item(), critic_loss=critic_loss.item(),
        mean_reward=mean_reward,
    )


def greedy_summaries(
    sets: Sequence[DocumentSet],
    encoder: HierarchicalEncoder,
    extractor: PointerExtractor,
    mmr_model: TfidfModel | None,
    mmr_cfg: MmrConfig,
) -> dict[str, list[int]]:
    out = {}
    with torch.no_grad():
        for ds in sets:
            A = encoder.encode_set(ds)
            out[ds.set_id] = extract_summary(
                ds, A, extractor, mmr_model, mmr_cfg, mode="greedy"
            )
    return out


def validation_score(
    sets: Sequence[DocumentSet],
    summaries: dict[str, list[int]],
    rouge_cfg: RougeConfig,
) -> float:
    """Mean ROUGE-1 F1 of summaries over their sets."""
    scores = [
        rouge_n(summary_text(ds, summaries[ds.set_id]), ds.references, 1, rouge_cfg).f1
        for ds in sets
    ]
    return sum(scores) / len(scores)


@dataclass
class TrainResult:
    encoder: HierarchicalEncoder
    extractor: PointerExtractor
    critic: Critic
    vocab: Vocab
    mmr_model: TfidfModel
    best_val_score: float
    best_epoch: int
    epochs_run: int
    evaluations: int
    curve: list[tuple[int, float, float | None]]


def _snapshot(*modules: nn.Module) -> list[dict]:
    return [copy.deepcopy(m.state_dict()) for m in modules]


def _restore(states: list[dict], *modules: nn.Module) -> None:
    for m, state in zip(modules, states):
        m.load_state_dict(state)


def write_curve(path: str | Path, curve: Sequence[tuple[int, float, float | None]]) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "mean_reward", "val_rouge1_f1"])
        for epoch, reward, val in curve:
            writer.writerow([epoch, f"{reward:.6f}", "" if val is None else f"{val:.6f}"])


def train(
    train_sets: Sequence[DocumentSet],
    val_sets: Sequence[DocumentSet],
    cfg: TrainConfig,
    dims: Dims = Dims(),
    mmr_cfg: MmrConfig = MmrConfig(),
    rouge_cfg: RougeConfig = RougeConfig(),
    variant: Variant = "soft_attn",
    beta: float = 0.5,
    k: int | None = None,
    curve_path: str | Path | None = None,
    min_count: int = 1,
) -> TrainResult:
    """Full-batch policy-gradient training with early stopping.

    One sampled episode per training set per epoch; every `eval_every`
    epochs the validation sets are greedy-decoded and scored with
    ROUGE-1 F1. The best-scoring parameters are kept and restored at the
    end. Training stops after `patience` consecutive evaluations without
    improvement.
    """
    if not train_sets:
        raise ValueError("need at least one training set")
    torch.set_num_threads(1)

    vocab = build_vocab(train_sets, min_count=min_count)
    mmr_model = fit_tfidf(list(train_sets) + list(val_sets))
    encoder = init_encoder(cfg.seed, dims, vocab)
    extractor = init_extractor(cfg.seed + 1, dims, variant, beta, k)
    critic = init_critic(cfg.seed + 2, dims)
    lr = cfg.learning_rate if cfg.learning_rate is not None else default_learning_rate(variant)
    policy_params = list(encoder.parameters()) + list(extractor.parameters())
    policy_opt = torch.optim.Adam(policy_params, lr=lr)
    critic_opt = torch.optim.Adam(critic.parameters(), lr=lr)
    sample_rng = torch.Generator()
    sample_rng.manual_seed(cfg.seed + 3)

    needs_mmr = variant != "vanilla"
    scorers = {
        ds.set_id: MmrScorer(ds, mmr_model, mmr_cfg) for ds in train_sets
    } if needs_mmr else {}
    caches = {ds.set_id: RewardCache(ds, rouge_cfg) for ds in train_sets}
    best_val = float("-inf")
    best_epoch = -1
    best_state = _snapshot(encoder, extractor, critic)
    bad_evals = 0
    evaluations = 0
    curve: list[tuple[int, float, float | None]] = []

    epoch = 0
    for epoch in range(cfg.epochs):
        batch = []
        for ds in train_sets:
            A = encoder.encode_set(ds)
            trace = rollout(
                ds, A, extractor, mmr_model if needs_mmr else None,
                mmr_cfg, rouge_cfg, sample_rng,
                scorer=scorers.get(ds.set_id),
                reward_cache=caches[ds.set_id],
            )
            batch.append((trace, A))
        diag = policy_update(batch, critic, policy_opt, critic_opt, policy_params, cfg)

        val_score: float | None = None
        if val_sets and (epoch + 1) % cfg.eval_every == 0:
            summaries = greedy_summaries(
                val_sets, encoder, extractor, mmr_model if needs_mmr else None, mmr_cfg
            )
            val_score = validation_score(val_sets, summaries, rouge_cfg)
            evaluations += 1
            if val_score > best_val:
                best_val = val_score
                best_epoch = epoch
                best_state = _snapshot(encoder, extractor, critic)
                bad_evals = 0
            else:
                bad_evals += 1
        curve.append((epoch, diag.mean_reward, val_score))
        if val_sets and bad_evals >= cfg.patience:
            break

    if best_epoch >= 0:
        _restore(best_state, encoder, extractor, critic)
    if curve_path is not None:
        write_curve(curve_path, curve)
    return TrainResult(
        encoder=encoder,
        extractor=extractor,
        critic=critic,
        vocab=vocab,
        mmr_model=mmr_model,
        best_val_score=best_val,
        best_epoch=best_epoch,
        epochs_run=epoch + 1,
        evaluations=evaluations,
        curve=curve,
    )


def oracle_summary(
    doc_set: DocumentSet, rouge_cfg: RougeConfig, word_limit: int = 100
) -> list[int]:
    """Greedy reference-aware upper bound: maximize ROUGE-1 F1 per step.

    Stops when no remaining sentence strictly improves the score or the
    word limit is reached; ties go to the lowest global index.
    """
    sentences = doc_set.sentences
    chosen: list[int] = []
    words = 0
    best_f1 = 0.0
    while words < word_limit and len(chosen) < len(sentences):
        best_j = None
        for j in range(len(sentences)):
            if j in chosen:
                continue
            candidate = summary_text(doc_set, chosen + [j])
            f1 = rouge_n(candidate, doc_set.references, 1, rouge_cfg).f1
            if f1 > best_f1:
                best_f1 = f1
                best_j = j
        if best_j is None:
            break
        chosen.append(best_j)
        words += sentences[best_j].word_count
    return chosen
