"""Differentiable building blocks shared by the encoder and the three decoders."""

from __future__ import annotations

import math
from typing import Callable

import torch
from torch import nn

FUSION_MODES = ("cln", "concat", "add", "gate")
LN_EPS = 1e-12


class NumericError(ArithmeticError):
    """Raised when a loss or gradient check produces a non-finite value."""


def xavier_linear(in_dim: int, out_dim: int, bias: bool = True) -> nn.Linear:
    layer = nn.Linear(in_dim, out_dim, bias=bias)
    nn.init.xavier_uniform_(layer.weight)
    if bias:
        nn.init.zeros_(layer.bias)
    return layer


def normal_embedding(num: int, dim: int, std: float = 0.02) -> nn.Embedding:
    table = nn.Embedding(num, dim)
    nn.init.normal_(table.weight, std=std)
    return table


def _standardize(x: torch.Tensor, eps: float) -> torch.Tensor:
    mean = x.mean(-1, keepdim=True)
    centered = x - mean
    var = (centered * centered).mean(-1, keepdim=True)
    # eps**2 under the root keeps the backward pass finite for constant rows
    std = torch.sqrt(var + eps * eps)
    return centered / (std + eps)


class LayerNorm(nn.Module):
    def __init__(self, dim: int, eps: float = LN_EPS):
        super().__init__()
        self.gain = nn.Parameter(torch.ones(dim))
        self.bias = nn.Parameter(torch.zeros(dim))
        self.eps = eps

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.gain * _standardize(x, self.eps) + self.bias


class ConditionalLayerNorm(nn.Module):
    """Layer normalization whose gain and bias are affine maps of a condition vector."""

    def __init__(self, dim: int, cond_dim: int | None = None, eps: float = LN_EPS):
        super().__init__()
        cond_dim = dim if cond_dim is None else cond_dim
        self.dim = dim
        self.cond_dim = cond_dim
        self.gain = xavier_linear(cond_dim, dim)
        self.shift = xavier_linear(cond_dim, dim)
        nn.init.ones_(self.gain.bias)
        self.eps = eps

    def forward(self, cond: torch.Tensor, states: torch.Tensor) -> torch.Tensor:
        """cond: [..., cond_dim]; states: [..., N, dim] -> [..., N, dim]."""
        if cond.shape[-1] != self.cond_dim or states.shape[-1] != self.dim:
            raise ValueError(
                f"shape mismatch: condition {tuple(cond.shape)}, states {tuple(states.shape)}, "
                f"expected cond_dim={self.cond_dim}, dim={self.dim}"
            )
        gamma = self.gain(cond).unsqueeze(-2)
        beta = self.shift(cond).unsqueeze(-2)
        return gamma * _standardize(states, self.eps) + beta


def cln(layer: ConditionalLayerNorm, condition: torch.Tensor, states: torch.Tensor) -> torch.Tensor:
    return layer(condition, states)


class Fusion(nn.Module):
    """Injects a condition vector into every token state.

    ``cln`` and ``add``/``gate`` keep the state width; ``concat`` widens it by the
    condition width, which is reported through ``out_dim``.
    """

    def __init__(self, mode: str, dim: int, cond_dim: int | None = None):
        super().__init__()
        if mode not in FUSION_MODES:
            raise ValueError(f"unknown fusion mode {mode!r}; choose from {FUSION_MODES}")
        cond_dim = dim if cond_dim is None else cond_dim
        if mode in ("add", "gate") and cond_dim != dim:
            raise ValueError(f"{mode} fusion needs equal widths, got {dim} and {cond_dim}")
        self.mode = mode
        self.dim = dim
        self.cond_dim = cond_dim
        self.out_dim = dim + cond_dim if mode == "concat" else dim
        if mode == "cln":
            self.norm = ConditionalLayerNorm(dim, cond_dim)
        elif mode == "gate":
            self.gate = xavier_linear(dim + cond_dim, dim)

    def forward(self, cond: torch.Tensor, states: torch.Tensor) -> torch.Tensor:
        if cond.shape[-1] != self.cond_dim or states.shape[-1] != self.dim:
            raise ValueError(
                f"shape mismatch: condition {tuple(cond.shape)}, states {tuple(states.shape)}"
            )
        if self.mode == "cln":
            return self.norm(cond, states)
        c = cond.unsqueeze(-2).expand(*states.shape[:-1], self.cond_dim)
        if self.mode == "add":
            return states + c
        if self.mode == "concat":
            return torch.cat([states, c], dim=-1)
        g = torch.sigmoid(self.gate(torch.cat([states, c], dim=-1)))
        return g * states + (1 - g) * c


def fuse(fusion: Fusion, condition: torch.Tensor, states: torch.Tensor) -> torch.Tensor:
    return fusion(condition, states)


class SelfAttentionBlock(nn.Module):
    """One multi-head self-attention layer with residual connection and layer norm.

    An optional position-wise feed-forward sublayer (also residual + norm) is
    appended when ``feed_forward`` is set; the stacked encoder uses it, the
    decoders do not by default.
    """

    def __init__(self, dim: int, heads: int = 4, feed_forward: bool = False, ff_dim: int | None = None,
                 dropout: float = 0.0):
        super().__init__()
        if dim % heads:
            raise ValueError(f"width {dim} not divisible by {heads} heads")
        self.dim = dim
        self.heads = heads
        self.head_dim = dim // heads
        self.query = xavier_linear(dim, dim)
        # a key bias only shifts each query's scores by a constant, which softmax ignores
        self.key = xavier_linear(dim, dim, bias=False)
        self.value = xavier_linear(dim, dim)
        self.out = xavier_linear(dim, dim)
        self.norm = LayerNorm(dim)
        self.dropout = nn.Dropout(dropout)
        self.feed_forward = feed_forward
        if feed_forward:
            ff_dim = ff_dim or 4 * dim
            self.ff_in = xavier_linear(dim, ff_dim)
            self.ff_out = xavier_linear(ff_dim, dim)
            self.ff_norm = LayerNorm(dim)

    def _split(self, x: torch.Tensor) -> torch.Tensor:
        *lead, n, _ = x.shape
        return x.reshape(*lead, n, self.heads, self.head_dim).transpose(-3, -2)

    def forward(self, x: torch.Tensor, mask: torch.Tensor | None = None) -> torch.Tensor:
        """x: [B, N, dim]; mask: [B, N] bool, True on real tokens."""
        if x.shape[-1] != self.dim:
            raise ValueError(f"expected width {self.dim}, got {x.shape[-1]}")
        q, k, v = self._split(self.query(x)), self._split(self.key(x)), self._split(self.value(x))
        scores = q @ k.transpose(-1, -2) / math.sqrt(self.head_dim)
        if mask is not None:
            scores = scores.masked_fill(~mask[..., None, None, :], float("-inf"))
        weights = torch.softmax(scores, dim=-1)
        ctx = (weights @ v).transpose(-3, -2).reshape(x.shape)
        h = self.norm(x + self.dropout(self.out(ctx)))
        if self.feed_forward:
            ff = self.ff_out(torch.nn.functional.gelu(self.ff_in(h)))
            h = self.ff_norm(h + self.dropout(ff))
        return h


def self_attention(block: SelfAttentionBlock, states: torch.Tensor, mask: torch.Tensor | None = None):
    squeeze = states.dim() == 2
    if squeeze:
        states = states.unsqueeze(0)
        mask = None if mask is None else mask.unsqueeze(0)
    out = block(states, mask)
    return out.squeeze(0) if squeeze else out


def grad_check(module: nn.Module, loss_fn: Callable[[nn.Module], torch.Tensor], eps: float = 1e-5,
               corrupt: str | None = None) -> float:
    """Compare autograd gradients against central finite differences.

    Runs in float64 on the module as given (call ``module.double()`` first).
    For each named parameter tensor the error is
    ``max|g_fd - g_an| / max(max|g_fd|, max|g_an|, 1e-8)``; the maximum over
    tensors is returned. ``corrupt`` names a parameter whose analytic gradient
    is doubled, which must make the check fail.
    """
    params = [(n, p) for n, p in module.named_parameters() if p.requires_grad]
    if not params:
        return 0.0
    module.zero_grad(set_to_none=True)
    loss = loss_fn(module)
    if not torch.isfinite(loss):
        raise NumericError(f"non-finite loss {loss.item()}")
    loss.backward()
    worst = 0.0
    with torch.no_grad():
        for name, p in params:
            analytic = torch.zeros_like(p) if p.grad is None else p.grad.detach().clone()
            if name == corrupt:
                analytic = analytic * 2
            numeric = torch.zeros_like(p)
            flat = p.view(-1)
            num_flat = numeric.view(-1)
            for i in range(flat.numel()):
                orig = flat[i].item()
                flat[i] = orig + eps
                up = loss_fn(module).item()
                flat[i] = orig - eps
                down = loss_fn(module).item()
                flat[i] = orig
                if not (math.isfinite(up) and math.isfinite(down)):
                    raise NumericError(f"non-finite loss while perturbing {name}[{i}]")
                num_flat[i] = (up - down) / (2 * eps)
            diff = (numeric - analytic).abs().max().item()
            scale = max(numeric.abs().max().item(), analytic.abs().max().item(), 1e-8)
            worst = max(worst, diff / scale)
    module.zero_grad(set_to_none=True)
    return worst
