"""Cascade decoding: types, then triggers per type, then arguments per (type, trigger)."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import torch

from .encoder import SequenceTooLongError
from .model import CascadeModel
from .schema import AnnotatedSentence, Corpus, EventRecord, Span, sentence_to_dict
from .spans import decode_spans

DEFAULT_THRESHOLDS = (0.5, 0.5, 0.5, 0.5, 0.5)


@dataclass
class ArgumentConfidence:
    role: str
    span: Span
    start_prob: float
    end_prob: float


@dataclass
class PredictedEvent:
    record: EventRecord
    type_prob: float
    trigger_start_prob: float
    trigger_end_prob: float
    argument_probs: list[ArgumentConfidence] = field(default_factory=list)

    @property
    def score(self) -> float:
        s = self.type_prob * self.trigger_start_prob * self.trigger_end_prob
        for a in self.argument_probs:
            s *= a.start_prob * a.end_prob
        return s

    def to_dict(self) -> dict:
        return {
            "type": self.record.type,
            "trigger": {"span": self.record.trigger.as_list()},
            "args": [
                {"role": a.role, "span": a.span.as_list(),
                 "confidence": {"start": a.start_prob, "end": a.end_prob}}
                for a in self.argument_probs
            ],
            "confidence": {
                "type": self.type_prob,
                "trigger_start": self.trigger_start_prob,
                "trigger_end": self.trigger_end_prob,
                "score": self.score,
            },
        }


@dataclass
class PredictedSentence(AnnotatedSentence):
    predicted: list[PredictedEvent] = field(default_factory=list)


@torch.no_grad()
def predict_tokens(model: CascadeModel, token_lists: Sequence[Sequence[str]], thresholds=DEFAULT_THRESHOLDS,
                   strict_roles: bool = False) -> list[list[PredictedEvent]]:
    """Decode a batch of tokenized sentences; one canonically ordered event list per sentence."""
    if not token_lists:
        return []
    x1, x2, x3, x4, x5 = thresholds
    schema = model.schema
    for toks in token_lists:
        if len(toks) > model.max_len:
            raise SequenceTooLongError(f"sentence of {len(toks)} tokens exceeds maximum length {model.max_len}")
    was_training = model.training
    model.eval()
    lengths = [len(t) for t in token_lists]
    n = max(lengths)
    ids = torch.tensor([model.vocab.encode(t) + [0] * (n - len(t)) for t in token_lists], dtype=torch.long)
    mask = torch.tensor([[True] * k + [False] * (n - k) for k in lengths], dtype=torch.bool)

    H, cls_state = model.encode(ids, mask)
    type_probs = model.type_detector(H, mask, cls_state)

    trig_sent, trig_type = [], []
    for b, row in enumerate(type_probs.tolist()):
        for t, p in enumerate(row):
            if p > x1:
                trig_sent.append(b)
                trig_type.append(t)
    results: list[list[PredictedEvent]] = [[] for _ in token_lists]
    if not trig_sent:
        model.train(was_training)
        return results
    ts_idx = torch.tensor(trig_sent)
    tt_idx = torch.tensor(trig_type)
    G, t_start, t_end = model.trigger_extractor(H[ts_idx], model.type_vectors(tt_idx), mask[ts_idx])
    t_start, t_end = t_start.tolist(), t_end.tolist()

    arg_cond, arg_spans = [], []
    for k, b in enumerate(trig_sent):
        k_len = lengths[b]
        for span in decode_spans(t_start[k][:k_len], t_end[k][:k_len], x2, x3):
            arg_cond.append(k)
            arg_spans.append(span)
    if arg_cond:
        ac = torch.tensor(arg_cond)
        starts = torch.tensor([s.start for s in arg_spans])
        ends = torch.tensor([s.end for s in arg_spans])
        a_start, a_end, _ = model.argument_extractor(
            G[ac], model.argument_type_vectors(tt_idx[ac]), starts, ends, mask[ts_idx[ac]])
        a_start, a_end = a_start.tolist(), a_end.tolist()

    for m, (k, span) in enumerate(zip(arg_cond, arg_spans)):
        b, t = trig_sent[k], trig_type[k]
        type_name = schema.types[t]
        legal = set(schema.legal_roles[type_name])
        k_len = lengths[b]
        args, confs = [], []
        for r, role in enumerate(schema.roles):
            if strict_roles and role not in legal:
                continue
            rs, re = a_start[m][r][:k_len], a_end[m][r][:k_len]
            for a in decode_spans(rs, re, x4, x5):
                args.append((role, a))
                confs.append(ArgumentConfidence(role, a, rs[a.start], re[a.end]))
        results[b].append(PredictedEvent(
            EventRecord(type_name, span, args),
            type_probs[b, t].item(), t_start[k][span.start], t_end[k][span.end], confs))
    for events in results:
        events.sort(key=lambda e: (schema.type_index[e.record.type], e.record.trigger.start, e.record.trigger.end))
    model.train(was_training)
    return results


def extract_events(tokens: Sequence[str], model: CascadeModel, thresholds=DEFAULT_THRESHOLDS,
                   strict_roles: bool = False) -> list[PredictedEvent]:
    return predict_tokens(model, [tokens], thresholds, strict_roles)[0]


def predict_corpus(model: CascadeModel, corpus: Corpus, thresholds=DEFAULT_THRESHOLDS,
                   strict_roles: bool = False, batch_size: int = 64,
                   drop_empty: bool = False) -> list[PredictedSentence]:
    """Predicted sentences (same ids and tokens as the input) carrying decoded events."""
    out = []
    sents = corpus.sentences
    for i in range(0, len(sents), batch_size):
        chunk = sents[i:i + batch_size]
        for sent, events in zip(chunk, predict_tokens(model, [s.tokens for s in chunk], thresholds, strict_roles)):
            if drop_empty:
                events = [e for e in events if e.record.arguments]
            out.append(PredictedSentence(sent.id, list(sent.tokens), [e.record for e in events], events))
    return out


def prediction_to_dict(sentence: AnnotatedSentence) -> dict:
    base = sentence_to_dict(sentence)
    events = getattr(sentence, "predicted", None)
    if events is not None:
        base["events"] = [e.to_dict() for e in events]
    return base


def save_predictions(sentences: Sequence[AnnotatedSentence], path) -> None:
    Path(path).write_text(
        "".join(json.dumps(prediction_to_dict(s), ensure_ascii=False) + "\n" for s in sentences),
        encoding="utf-8")


def check_cascade(event: PredictedEvent, thresholds=DEFAULT_THRESHOLDS, tol: float = 1e-9) -> list[str]:
    """Consistency problems of one decoded event; empty when all component probabilities clear their thresholds."""
    x1, x2, x3, x4, x5 = thresholds
    problems = []
    if not event.type_prob > x1:
        problems.append(f"type prob {event.type_prob} <= {x1}")
    if not event.trigger_start_prob > x2:
        problems.append(f"trigger start prob {event.trigger_start_prob} <= {x2}")
    if not event.trigger_end_prob > x3:
        problems.append(f"trigger end prob {event.trigger_end_prob} <= {x3}")
    product = event.type_prob * event.trigger_start_prob * event.trigger_end_prob
    for a in event.argument_probs:
        if not a.start_prob > x4:
            problems.append(f"argument {a.role} start prob {a.start_prob} <= {x4}")
        if not a.end_prob > x5:
            problems.append(f"argument {a.role} end prob {a.end_prob} <= {x5}")
        product *= a.start_prob * a.end_prob
    if not math.isclose(event.score, product, rel_tol=0, abs_tol=tol):
        problems.append(f"score {event.score} != product {product}")
    if not 0.0 < event.score <= 1.0:
        problems.append(f"score {event.score} outside (0, 1]")
    return problems
