"""Finite-difference gradient checks over every trainable component, at toy sizes in float64."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import torch
from torch import nn

from .config import TrainConfig
from .decoders import ArgumentExtractor, TriggerExtractor, TypeDetector
from .encoder import Vocabulary
from .layers import ConditionalLayerNorm, Fusion, SelfAttentionBlock, grad_check, self_attention
from .model import CascadeModel
from .schema import AnnotatedSentence, EventRecord, EventSchema, Span

TOLERANCE = 1e-4
F64 = torch.float64


@dataclass
class GradCheckResult:
    name: str
    error: float
    tolerance: float = TOLERANCE

    @property
    def passed(self) -> bool:
        return self.error <= self.tolerance


def _nll(p: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
    return -(y * p.log() + (1 - y) * (1 - p).log()).sum()


def _type_detector(gen):
    det = TypeDetector(3, 4).double()
    H = torch.randn(1, 5, 4, dtype=F64, generator=gen)
    mask = torch.ones(1, 5, dtype=torch.bool)
    y = torch.tensor([[1.0, 0.0, 1.0]], dtype=F64)
    return det, lambda m: _nll(m(H, mask), y)


def _cln(gen):
    layer = ConditionalLayerNorm(6).double()
    c = torch.randn(6, dtype=F64, generator=gen)
    H, tgt = torch.randn(4, 6, dtype=F64, generator=gen), torch.randn(4, 6, dtype=F64, generator=gen)
    return layer, lambda m: ((m(c, H) - tgt) ** 2).sum()


def _gate(gen):
    fusion = Fusion("gate", 4).double()
    c, H = torch.randn(4, dtype=F64, generator=gen), torch.randn(5, 4, dtype=F64, generator=gen)
    w = torch.randn(5, 4, dtype=F64, generator=gen)
    return fusion, lambda m: (torch.tanh(m(c, H)) * w).sum()


def _attention(gen):
    block = SelfAttentionBlock(4, heads=2).double()
    X, w = torch.randn(5, 4, dtype=F64, generator=gen), torch.randn(5, 4, dtype=F64, generator=gen)
    return block, lambda m: (torch.tanh(self_attention(m, X)) * w).sum()


def _trigger(gen):
    ext = TriggerExtractor(4, "cln", heads=2).double()
    H, c = torch.randn(1, 5, 4, dtype=F64, generator=gen), torch.randn(1, 4, dtype=F64, generator=gen)
    ys = torch.tensor([[0, 1, 0, 0, 1]], dtype=F64)
    ye = torch.tensor([[0, 0, 1, 0, 1]], dtype=F64)

    def loss(m):
        _, s, e = m(H, c)
        return _nll(s, ys) + _nll(e, ye)
    return ext, loss


def _argument(gen):
    ext = ArgumentExtractor(n_roles=3, type_dim=4, state_dim=4, fusion="cln", heads=2,
                            pos_dim=2, max_distance=3).double()
    G, c = torch.randn(1, 6, 4, dtype=F64, generator=gen), torch.randn(1, 4, dtype=F64, generator=gen)
    ys = torch.zeros(1, 3, 6, dtype=F64)
    ye = torch.zeros(1, 3, 6, dtype=F64)
    ys[0, 0, 0] = ye[0, 0, 1] = ys[0, 2, 4] = ye[0, 2, 5] = 1.0

    def loss(m):
        s, e, _ = m(G, c, torch.tensor([2]), torch.tensor([3]))
        return _nll(s, ys) + _nll(e, ye)
    return ext, loss


def toy_model(dim: int = 8) -> tuple[CascadeModel, AnnotatedSentence]:
    """A double-precision model and one 6-token sentence with a shared trigger."""
    from .training import build_instance, collate

    schema = EventSchema(["A", "B"], ["x", "y", "z"], {"A": ["x", "y"], "B": ["y", "z"]})
    sent = AnnotatedSentence("g", ["a", "b", "t", "c", "d", "e"], [
        EventRecord("A", Span(2, 2), [("x", Span(0, 1))]),
        EventRecord("B", Span(2, 2), [("y", Span(3, 3)), ("z", Span(4, 5))]),
    ])
    vocab = Vocabulary.build([sent.tokens])
    config = TrainConfig(dim=dim, layers=1, heads=2, max_len=6, pos_dim=2, max_distance=3, dropout=0.0)
    model = CascadeModel(schema, vocab, config).double().eval()
    return model, collate([build_instance(sent, schema, vocab)], len(schema.roles), F64)


def _joint(gen):
    from .training import joint_loss

    model, batch = toy_model()
    return model, lambda m: joint_loss(m, batch)


CHECKS: dict[str, Callable] = {
    "similarity+attend_pool": _type_detector,
    "cln": _cln,
    "gate_fusion": _gate,
    "self_attention": _attention,
    "trigger_tagger": _trigger,
    "argument_tagger": _argument,
    "joint_loss": _joint,
}


def run_grad_checks(seed: int = 0, corrupt: bool = False,
                    names: list[str] | None = None) -> list[GradCheckResult]:
    """One result per component; ``corrupt`` doubles the first parameter's analytic gradient."""
    results = []
    for name in names or list(CHECKS):
        torch.manual_seed(seed)
        gen = torch.Generator().manual_seed(seed)
        module, loss = CHECKS[name](gen)
        target = next(iter(n for n, _ in module.named_parameters())) if corrupt else None
        results.append(GradCheckResult(name, grad_check(module, loss, corrupt=target)))
    return results


__all__ = ["CHECKS", "GradCheckResult", "TOLERANCE", "run_grad_checks", "toy_model"]
