"""Type detection, type-conditioned trigger tagging and (type, trigger)-conditioned argument tagging."""

from __future__ import annotations

import torch
from torch import nn

from .layers import Fusion, SelfAttentionBlock, normal_embedding, xavier_linear
from .schema import Span
from .spans import decode_spans

POOLING_MODES = ("adaptive", "maxp", "meanp", "cls")


class TypeDetector(nn.Module):
    """Scores every event type against a type-adaptive sentence summary.

    ``delta(c, h) = v . tanh(W [c; h; |c - h|; c * h])`` serves both as the
    attention score over tokens and as the final type score.
    """

    def __init__(self, n_types: int, dim: int, pooling: str = "adaptive"):
        super().__init__()
        if pooling not in POOLING_MODES:
            raise ValueError(f"unknown pooling {pooling!r}; choose from {POOLING_MODES}")
        self.dim = dim
        self.pooling = pooling
        self.type_embeddings = normal_embedding(n_types, dim)
        self.W = xavier_linear(4 * dim, 4 * dim, bias=False)
        self.v = xavier_linear(4 * dim, 1, bias=False)

    def similarity(self, c: torch.Tensor, h: torch.Tensor) -> torch.Tensor:
        if c.shape[-1] != self.dim or h.shape[-1] != self.dim:
            raise ValueError(f"expected width {self.dim}, got {c.shape[-1]} and {h.shape[-1]}")
        c, h = torch.broadcast_tensors(c, h)
        feats = torch.cat([c, h, (c - h).abs(), c * h], dim=-1)
        return self.v(torch.tanh(self.W(feats))).squeeze(-1)

    def attend_pool(self, c: torch.Tensor, H: torch.Tensor, mask: torch.Tensor | None = None):
        """c: [B, T, d], H: [B, N, d] -> (s_c [B, T, d], weights [B, T, N])."""
        scores = self.similarity(c.unsqueeze(-2), H.unsqueeze(-3))
        if mask is not None:
            scores = scores.masked_fill(~mask.unsqueeze(-2), float("-inf"))
        weights = torch.softmax(scores, dim=-1)
        return weights @ H, weights

    def summaries(self, H: torch.Tensor, mask: torch.Tensor, cls_state: torch.Tensor | None = None):
        B = H.shape[0]
        C = self.type_embeddings.weight.unsqueeze(0).expand(B, -1, -1)
        if self.pooling == "adaptive":
            return self.attend_pool(C, H, mask)[0]
        if self.pooling == "maxp":
            s = H.masked_fill(~mask.unsqueeze(-1), float("-inf")).max(dim=1).values
        elif self.pooling == "meanp":
            m = mask.unsqueeze(-1).to(H.dtype)
            s = (H * m).sum(1) / m.sum(1)
        else:
            if cls_state is None:
                raise ValueError("cls pooling needs the sentence-token state")
            s = cls_state
        return s.unsqueeze(1).expand_as(C)

    def forward(self, H: torch.Tensor, mask: torch.Tensor, cls_state: torch.Tensor | None = None):
        """Type probabilities [B, T] for every type."""
        s = self.summaries(H, mask, cls_state)
        C = self.type_embeddings.weight.unsqueeze(0).expand_as(s)
        return torch.sigmoid(self.similarity(C, s))

    def detect_types(self, H: torch.Tensor, threshold: float = 0.5, cls_state=None):
        """Single sentence ``H`` [N, d] -> (predicted type ids, probabilities for all types)."""
        mask = torch.ones(1, H.shape[0], dtype=torch.bool)
        cs = None if cls_state is None else cls_state.unsqueeze(0)
        probs = self(H.unsqueeze(0), mask, cs).squeeze(0)
        return [i for i, p in enumerate(probs.tolist()) if p > threshold], probs


class TriggerExtractor(nn.Module):
    def __init__(self, dim: int, fusion: str = "cln", heads: int = 4, use_attention: bool = True,
                 attention_ff: bool = False):
        super().__init__()
        self.fusion = Fusion(fusion, dim, dim)
        self.out_dim = self.fusion.out_dim
        self.attention = SelfAttentionBlock(self.out_dim, heads, feed_forward=attention_ff) if use_attention else None
        self.start_head = xavier_linear(self.out_dim, 1)
        self.end_head = xavier_linear(self.out_dim, 1)

    def condition_on_type(self, H: torch.Tensor, c: torch.Tensor, mask: torch.Tensor | None = None):
        """H: [K, N, d], c: [K, d] -> (G [K, N, g], Z [K, N, g])."""
        G = self.fusion(c, H)
        Z = G if self.attention is None else self.attention(G, mask)
        return G, Z

    def tag(self, Z: torch.Tensor):
        return torch.sigmoid(self.start_head(Z)).squeeze(-1), torch.sigmoid(self.end_head(Z)).squeeze(-1)

    def forward(self, H, c, mask=None):
        G, Z = self.condition_on_type(H, c, mask)
        start, end = self.tag(Z)
        return G, start, end

    def tag_triggers(self, Z: torch.Tensor, start_threshold: float = 0.5, end_threshold: float = 0.5):
        """Single condition ``Z`` [N, g] -> (start probs, end probs, spans)."""
        start, end = self.tag(Z)
        spans = decode_spans(start.tolist(), end.tolist(), start_threshold, end_threshold)
        return start, end, spans


def relative_positions(n: int, trigger: Span, max_distance: int) -> list[int]:
    """Clipped signed distance to the nearer trigger boundary, shifted to a table index."""
    if trigger.end >= n:
        raise ValueError(f"trigger {trigger} outside a {n}-token sentence")
    out = []
    for i in range(n):
        if i < trigger.start:
            d = i - trigger.start
        elif i > trigger.end:
            d = i - trigger.end
        else:
            d = 0
        out.append(max(-max_distance, min(max_distance, d)) + max_distance)
    return out


def relative_position_tensor(n: int, starts: torch.Tensor, ends: torch.Tensor, max_distance: int) -> torch.Tensor:
    """Batched :func:`relative_positions`: starts/ends [M] -> indices [M, n]."""
    i = torch.arange(n).unsqueeze(0)
    s, e = starts.unsqueeze(1), ends.unsqueeze(1)
    d = torch.where(i < s, i - s, torch.where(i > e, i - e, torch.zeros_like(i)))
    return d.clamp(-max_distance, max_distance) + max_distance


def trigger_embedding(G: torch.Tensor, trigger: Span) -> torch.Tensor:
    if trigger.start < 0 or trigger.end >= G.shape[-2]:
        raise ValueError(f"trigger {trigger} outside a {G.shape[-2]}-token sentence")
    return (G[..., trigger.start, :] + G[..., trigger.end, :]) / 2


class ArgumentExtractor(nn.Module):
    def __init__(self, n_roles: int, type_dim: int, state_dim: int, fusion: str = "cln", heads: int = 4,
                 use_attention: bool = True, use_positions: bool = True, use_indicator: bool = True,
                 pos_dim: int = 16, max_distance: int = 16, attention_ff: bool = False):
        super().__init__()
        self.n_roles = n_roles
        self.max_distance = max_distance
        self.fusion = Fusion(fusion, state_dim, state_dim)
        f_dim = self.fusion.out_dim
        if use_attention and f_dim % heads:
            raise ValueError(f"argument state width {f_dim} not divisible by {heads} heads")
        self.attention = SelfAttentionBlock(f_dim, heads, feed_forward=attention_ff) if use_attention else None
        self.positions = normal_embedding(2 * max_distance + 1, pos_dim) if use_positions else None
        self.out_dim = f_dim + (pos_dim if use_positions else 0)
        self.start_heads = xavier_linear(self.out_dim, n_roles)
        self.end_heads = xavier_linear(self.out_dim, n_roles)
        self.indicator = xavier_linear(type_dim, n_roles) if use_indicator else None

    def condition_on_trigger(self, G: torch.Tensor, starts: torch.Tensor, ends: torch.Tensor,
                             mask: torch.Tensor | None = None) -> torch.Tensor:
        """G: [M, N, g]; starts/ends: [M] long -> Z^{ct} [M, N, out_dim]."""
        idx = torch.arange(G.shape[0])
        t = (G[idx, starts] + G[idx, ends]) / 2
        Zp = self.fusion(t, G)
        if self.attention is not None:
            Zp = self.attention(Zp, mask)
        if self.positions is None:
            return Zp
        rel = relative_position_tensor(G.shape[1], starts, ends, self.max_distance)
        return torch.cat([Zp, self.positions(rel)], dim=-1)

    def role_indicator(self, c: torch.Tensor) -> torch.Tensor:
        """Soft role legality per role: c [..., d] -> [..., R]."""
        if self.indicator is None:
            return torch.ones(*c.shape[:-1], self.n_roles, dtype=c.dtype)
        return torch.sigmoid(self.indicator(c))

    def tag(self, Z: torch.Tensor, c: torch.Tensor):
        """Z: [M, N, out_dim], c: [M, d] -> (start [M, R, N], end [M, R, N], indicator [M, R])."""
        ind = self.role_indicator(c)
        start = ind.unsqueeze(-1) * torch.sigmoid(self.start_heads(Z)).transpose(-1, -2)
        end = ind.unsqueeze(-1) * torch.sigmoid(self.end_heads(Z)).transpose(-1, -2)
        return start, end, ind

    def forward(self, G, c, starts, ends, mask=None):
        Z = self.condition_on_trigger(G, starts, ends, mask)
        return self.tag(Z, c)

    def tag_arguments(self, Z: torch.Tensor, c: torch.Tensor, roles: list[str],
                      start_threshold: float = 0.5, end_threshold: float = 0.5):
        """Single condition ``Z`` [N, out_dim] -> {role: (start probs, end probs, spans)}."""
        start, end, _ = self.tag(Z.unsqueeze(0), c.unsqueeze(0))
        out = {}
        for r, role in enumerate(roles):
            s, e = start[0, r], end[0, r]
            out[role] = (s, e, decode_spans(s.tolist(), e.tolist(), start_threshold, end_threshold))
        return out
