"""Hierarchical sentence encoder.

Words are embedded and run through convolutional banks (kernel widths
3/4/5, tanh, max-over-time) to get per-sentence vectors; each document's
sentence vectors then pass through a bi-directional LSTM, so a sentence's
contextual row depends only on its own document. The stacked rows plus a
trained STOP row form the action matrix the extractor points into.

All parameters are float64 and initialized uniformly in [-0.1, 0.1] from
a seeded generator, which keeps training runs bit-reproducible on CPU.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import torch
from torch import nn

from .corpus import DocumentSet

PAD_ID = 0
UNK_ID = 1
KERNEL_WIDTHS = (3, 4, 5)

INIT_RANGE = 0.1


@dataclass(frozen=True)
class Vocab:
    token_to_id: dict[str, int]

    @property
    def size(self) -> int:
        return len(self.token_to_id) + 2

    def lookup(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    def encode(self, tokens: Sequence[str]) -> list[int]:
        return [self.lookup(t) for t in tokens]


@dataclass(frozen=True)
class Dims:
    emb_dim: int = 32
    filters: int = 8
    hidden: int = 32

    def __post_init__(self):
        if min(self.emb_dim, self.filters, self.hidden) < 1:
            raise ValueError("all dims must be positive")

    @property
    def sent_dim(self) -> int:
        return len(KERNEL_WIDTHS) * self.filters

    @property
    def ctx_dim(self) -> int:
        return 2 * self.hidden


def build_vocab(sets: Sequence[DocumentSet], min_count: int = 1) -> Vocab:
    """Tokens with frequency >= min_count, ordered by (freq desc, token asc)."""
    freq: Counter = Counter()
    for ds in sets:
        for sent in ds.sentences:
            freq.update(sent.tokens)
    if not freq:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    kept = sorted(
        (tok for tok, c in freq.items() if c >= min_count),
        key=lambda tok: (-freq[tok], tok),
    )
    return Vocab({tok: i + 2 for i, tok in enumerate(kept)})


@dataclass(frozen=True)
class ActionMatrix:
    """(n+1) x d rows: one per sentence in global order, then the STOP row."""

    rows: torch.Tensor
    stop_index: int

    @property
    def n_sentences(self) -> int:
        return self.stop_index


def seeded_uniform_init_(module: nn.Module, generator: torch.Generator) -> None:
    """Fill every parameter with U[-0.1, 0.1], in sorted-name order."""
    with torch.no_grad():
        for _, p in sorted(module.named_parameters(), key=lambda kv: kv[0]):
            vals = torch.rand(p.shape, generator=generator, dtype=torch.float64)
            p.copy_(vals * (2 * INIT_RANGE) - INIT_RANGE)


class HierarchicalEncoder(nn.Module):
    def __init__(self, vocab: Vocab, dims: Dims):
        super().__init__()
        self.vocab = vocab
        self.dims = dims
        self.embedding = nn.Parameter(torch.zeros(vocab.size, dims.emb_dim, dtype=torch.float64))
        self.convs = nn.ModuleList(
            [
                nn.Conv1d(dims.emb_dim, dims.filters, k).double()
                for k in KERNEL_WIDTHS
            ]
        )
        self.bilstm = nn.LSTM(
            dims.sent_dim, dims.hidden, batch_first=True, bidirectional=True
        ).double()
        self.stop = nn.Parameter(torch.zeros(dims.ctx_dim, dtype=torch.float64))

    def _encode_one(self, tokens: tuple[str, ...]) -> torch.Tensor:
        ids = self.vocab.encode(tokens)
        width = max(len(ids), max(KERNEL_WIDTHS))
        row = torch.full((1, width), PAD_ID, dtype=torch.long)
        row[0, : len(ids)] = torch.tensor(ids, dtype=torch.long)
        emb = self.embedding[row].transpose(1, 2)  # (1, emb, width)
        pooled = [
            torch.tanh(conv(emb)).max(dim=2).values for conv in self.convs
        ]
        return torch.cat(pooled, dim=1).squeeze(0)

    def encode_sentences(self, token_lists: Sequence[Sequence[str]]) -> torch.Tensor:
        """Convolutional sentence vectors, (n, 3f).

        Each distinct token sequence is encoded in isolation (padded only
        to its own length), so a sentence's vector never depends on what
        it happens to be batched with; exact duplicates share one pass.
        """
        if not token_lists:
            raise ValueError("need at least one sentence")
        cache: dict[tuple[str, ...], torch.Tensor] = {}
        outs = []
        for toks in token_lists:
            key = tuple(toks)
            if key not in cache:
                cache[key] = self._encode_one(key)
            outs.append(cache[key])
        return torch.stack(outs)

    def encode_sentence(self, tokens: Sequence[str]) -> torch.Tensor:
        """Single-sentence vector of dim 3f."""
        if not tokens:
            raise ValueError("cannot encode an empty token sequence")
        return self.encode_sentences([tokens])[0]

    def encode_set(self, doc_set: DocumentSet) -> ActionMatrix:
        """Contextual rows for every sentence plus the STOP row."""
        sentences = doc_set.sentences
        sent_vecs = self.encode_sentences([s.tokens for s in sentences])
        rows = []
        offset = 0
        for doc in doc_set.documents:
            n = len(doc.sentences)
            if n == 0:
                continue
            doc_vecs = sent_vecs[offset : offset + n].unsqueeze(0)
            ctx, _ = self.bilstm(doc_vecs)
            rows.append(ctx.squeeze(0))
            offset += n
        stacked = torch.cat(rows + [self.stop.unsqueeze(0)], dim=0)
        return ActionMatrix(rows=stacked, stop_index=len(sentences))


def init_encoder(seed: int, dims: Dims, vocab: Vocab) -> HierarchicalEncoder:
    """Seeded encoder with uniform [-0.1, 0.1] parameters."""
    enc = HierarchicalEncoder(vocab, dims)
    gen = torch.Generator()
    gen.manual_seed(seed)
    seeded_uniform_init_(enc, gen)
    return enc
