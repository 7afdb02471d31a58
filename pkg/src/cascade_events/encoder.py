"""Token encoders producing contextual states H.

Any ``nn.Module`` with an integer ``dim`` attribute and a
``forward(ids, mask) -> [B, N, dim]`` method can stand in for
:class:`TransformerEncoder`, e.g. a wrapper around pretrained weights. Its
parameters are put in the encoder learning-rate group automatically because
the model registers it under the ``encoder`` attribute.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Sequence

import torch
from torch import nn

from .layers import LayerNorm, SelfAttentionBlock, normal_embedding

PAD, UNK, CLS = "[PAD]", "[UNK]", "[CLS]"


class SequenceTooLongError(ValueError):
    pass


class Vocabulary:
    """Token <-> id map. Ids 0, 1 and 2 are reserved for padding, unknown and sentence tokens."""

    def __init__(self, tokens: Sequence[str] = ()):
        self.itos: list[str] = [PAD, UNK, CLS]
        self.stoi: dict[str, int] = {t: i for i, t in enumerate(self.itos)}
        for t in tokens:
            self.add(t)

    pad_id, unk_id, cls_id = 0, 1, 2

    def add(self, token: str) -> int:
        if token not in self.stoi:
            self.stoi[token] = len(self.itos)
            self.itos.append(token)
        return self.stoi[token]

    def __len__(self) -> int:
        return len(self.itos)

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self.stoi.get(t, self.unk_id) for t in tokens]

    @classmethod
    def build(cls, sentences: Iterable[Sequence[str]]) -> "Vocabulary":
        vocab = cls()
        for toks in sentences:
            for t in toks:
                vocab.add(t)
        return vocab

    def save(self, path) -> None:
        Path(path).write_text("".join(t + "\n" for t in self.itos), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        lines = Path(path).read_text(encoding="utf-8").split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        if lines[:3] != [PAD, UNK, CLS]:
            raise ValueError(f"{path}: vocabulary must start with {PAD}, {UNK}, {CLS}")
        vocab = cls()
        for t in lines[3:]:
            vocab.add(t)
        return vocab


class TransformerEncoder(nn.Module):
    """Small trainable encoder: token + absolute position embeddings and stacked attention blocks."""

    def __init__(self, vocab_size: int, dim: int = 64, layers: int = 2, heads: int = 4,
                 max_len: int = 64, dropout: float = 0.1):
        super().__init__()
        self.dim = dim
        self.max_len = max_len
        self.vocab_size = vocab_size
        self.tokens = normal_embedding(vocab_size, dim)
        self.positions = normal_embedding(max_len, dim)
        self.embed_norm = LayerNorm(dim)
        self.blocks = nn.ModuleList(
            SelfAttentionBlock(dim, heads, feed_forward=True) for _ in range(layers)
        )
        self.dropout = nn.Dropout(dropout)

    def forward(self, ids: torch.Tensor, mask: torch.Tensor | None = None) -> torch.Tensor:
        """ids: [B, N] long -> states [B, N, dim]."""
        n = ids.shape[-1]
        if n > self.max_len:
            raise SequenceTooLongError(f"sequence of {n} tokens exceeds maximum length {self.max_len}")
        ids = torch.where((ids >= 0) & (ids < self.vocab_size), ids, torch.full_like(ids, Vocabulary.unk_id))
        pos = torch.arange(n, device=ids.device)
        h = self.embed_norm(self.tokens(ids) + self.positions(pos))
        for block in self.blocks:
            h = block(h, mask)
        # dropout on the encoder output feeds every decoder
        return self.dropout(h)


def encode(encoder: nn.Module, ids: Sequence[int]) -> torch.Tensor:
    """Encode one sentence of token ids into an N x d matrix."""
    x = torch.as_tensor(list(ids), dtype=torch.long).unsqueeze(0)
    return encoder(x, torch.ones_like(x, dtype=torch.bool)).squeeze(0)
