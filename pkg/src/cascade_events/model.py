"""The joint cascade model: shared encoder plus type, trigger and argument decoders."""

from __future__ import annotations

import torch
from torch import nn

from .config import TrainConfig
from .decoders import ArgumentExtractor, TriggerExtractor, TypeDetector
from .encoder import SequenceTooLongError, TransformerEncoder, Vocabulary
from .layers import normal_embedding
from .schema import EventSchema


class CascadeModel(nn.Module):
    def __init__(self, schema: EventSchema, vocab: Vocabulary, config: TrainConfig,
                 encoder: nn.Module | None = None):
        super().__init__()
        self.schema = schema
        self.vocab = vocab
        self.config = config
        self.use_cls = config.pooling == "cls"
        # one extra slot for the synthetic sentence token under cls pooling
        enc_len = config.max_len + (1 if self.use_cls else 0)
        self.encoder = encoder if encoder is not None else TransformerEncoder(
            len(vocab), config.dim, config.layers, config.heads, enc_len, config.dropout)
        dim = self.encoder.dim
        self.type_detector = TypeDetector(len(schema.types), dim, config.pooling)
        self.trigger_extractor = TriggerExtractor(
            dim, config.fusion, config.heads, config.self_attention, config.attention_ff)
        self.argument_extractor = ArgumentExtractor(
            len(schema.roles), dim, self.trigger_extractor.out_dim, config.fusion, config.heads,
            config.self_attention, config.position_embedding, config.indicator,
            config.pos_dim, config.max_distance, config.attention_ff)
        self.argument_type_embeddings = (
            None if config.share_type_embeddings else normal_embedding(len(schema.types), dim))

    @property
    def max_len(self) -> int:
        return self.config.max_len

    def type_vectors(self, type_ids: torch.Tensor) -> torch.Tensor:
        return self.type_detector.type_embeddings(type_ids)

    def argument_type_vectors(self, type_ids: torch.Tensor) -> torch.Tensor:
        if self.argument_type_embeddings is not None:
            return self.argument_type_embeddings(type_ids)
        return self.type_detector.type_embeddings(type_ids)

    def encode(self, ids: torch.Tensor, mask: torch.Tensor):
        """ids/mask [B, N] over real tokens -> (H [B, N, d], sentence-token state or None)."""
        if ids.shape[1] > self.max_len:
            raise SequenceTooLongError(f"sequence of {ids.shape[1]} tokens exceeds maximum length {self.max_len}")
        if not self.use_cls:
            return self.encoder(ids, mask), None
        cls = torch.full((ids.shape[0], 1), Vocabulary.cls_id, dtype=ids.dtype)
        full_mask = torch.cat([torch.ones_like(cls, dtype=torch.bool), mask], dim=1)
        states = self.encoder(torch.cat([cls, ids], dim=1), full_mask)
        return states[:, 1:], states[:, 0]

    def role_indicator(self, role: str, type_name: str) -> torch.Tensor:
        if role not in self.schema.role_index:
            raise ValueError(f"unknown role {role!r}")
        if type_name not in self.schema.type_index:
            raise ValueError(f"unknown event type {type_name!r}")
        c = self.argument_type_vectors(torch.tensor([self.schema.type_index[type_name]]))
        return self.argument_extractor.role_indicator(c)[0, self.schema.role_index[role]]

    def parameter_groups(self) -> dict[str, list[tuple[str, nn.Parameter]]]:
        groups = {"encoder": [], "decoder": []}
        for name, p in self.named_parameters():
            groups["encoder" if name.startswith("encoder.") else "decoder"].append((name, p))
        return groups

    def forward_conditions(self, ids, mask, trig_sent, trig_type, arg_cond, arg_start, arg_end):
        """Probabilities for a batch under explicit (teacher-forced or decoded) conditions.

        trig_sent/trig_type [K]: sentence index and type of each trigger condition.
        arg_cond [M]: the trigger condition each argument condition extends;
        arg_start/arg_end [M]: trigger span of each argument condition.
        """
        H, cls_state = self.encode(ids, mask)
        type_probs = self.type_detector(H, mask, cls_state)
        out = {"type_probs": type_probs}
        if trig_sent.numel():
            tmask = mask[trig_sent]
            G, ts, te = self.trigger_extractor(H[trig_sent], self.type_vectors(trig_type), tmask)
            out.update(trigger_start=ts, trigger_end=te, G=G)
        if arg_cond.numel():
            amask = mask[trig_sent[arg_cond]]
            c = self.argument_type_vectors(trig_type[arg_cond])
            rs, re, ind = self.argument_extractor(G[arg_cond], c, arg_start, arg_end, amask)
            out.update(argument_start=rs, argument_end=re, indicator=ind)
        return out
