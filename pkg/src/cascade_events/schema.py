"""Event schema, corpus data model, JSONL I/O, overlap taxonomy and splitting."""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

# overlap pattern labels
P1 = "P1"  # one span triggers events of two or more types
P2 = "P2"  # one span is an argument in two or more events
P3 = "P3"  # one span fills two or more roles inside a single event


class CorpusParseError(ValueError):
    def __init__(self, line_no: int, msg: str):
        super().__init__(f"line {line_no}: {msg}")
        self.line_no = line_no


class SchemaValidationError(ValueError):
    def __init__(self, sentence_id: str, msg: str):
        super().__init__(f"sentence {sentence_id!r}: {msg}")
        self.sentence_id = sentence_id


@dataclass(frozen=True, order=True)
class Span:
    start: int
    end: int

    def __post_init__(self):
        if self.start < 0 or self.end < self.start:
            raise ValueError(f"invalid span ({self.start}, {self.end})")

    def as_list(self) -> list[int]:
        return [self.start, self.end]


@dataclass
class EventSchema:
    types: list[str]
    roles: list[str]
    legal_roles: dict[str, list[str]]

    def __post_init__(self):
        if len(set(self.types)) != len(self.types):
            raise ValueError("duplicate event type names")
        if len(set(self.roles)) != len(self.roles):
            raise ValueError("duplicate role names")
        role_set = set(self.roles)
        for t in self.types:
            legal = self.legal_roles.get(t)
            if not legal:
                raise ValueError(f"type {t!r} has no legal roles")
            unknown = set(legal) - role_set
            if unknown:
                raise ValueError(f"type {t!r} lists unknown roles {sorted(unknown)}")
        extra = set(self.legal_roles) - set(self.types)
        if extra:
            raise ValueError(f"legal_roles names unknown types {sorted(extra)}")
        self.type_index = {t: i for i, t in enumerate(self.types)}
        self.role_index = {r: i for i, r in enumerate(self.roles)}

    @classmethod
    def from_dict(cls, data: dict) -> "EventSchema":
        legal = {t: list(rs) for t, rs in data["legal_roles"].items()}
        roles = data.get("roles")
        if roles is None:
            # role inventory in first-seen order over the type listing
            roles = []
            for t in data["types"]:
                for r in legal.get(t, []):
                    if r not in roles:
                        roles.append(r)
        return cls(types=list(data["types"]), roles=list(roles), legal_roles=legal)

    def to_dict(self) -> dict:
        return {
            "types": list(self.types),
            "roles": list(self.roles),
            "legal_roles": {t: list(self.legal_roles[t]) for t in self.types},
        }

    @classmethod
    def load(cls, path) -> "EventSchema":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), ensure_ascii=False, indent=2) + "\n", encoding="utf-8")

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]

    def legality_matrix(self) -> list[list[int]]:
        """|types| x |roles| 0/1 matrix of legal (type, role) pairs."""
        return [[int(r in self.legal_roles[t]) for r in self.roles] for t in self.types]


@dataclass
class EventRecord:
    type: str
    trigger: Span
    arguments: list[tuple[str, Span]] = field(default_factory=list)

    def key(self) -> tuple:
        return (self.type, self.trigger, tuple(sorted(self.arguments)))


@dataclass
class AnnotatedSentence:
    id: str
    tokens: list[str]
    events: list[EventRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass
class Corpus:
    sentences: list[AnnotatedSentence]
    schema: EventSchema

    def __post_init__(self):
        seen = set()
        for s in self.sentences:
            if s.id in seen:
                raise SchemaValidationError(s.id, "duplicate sentence id")
            seen.add(s.id)

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)

    @property
    def n_events(self) -> int:
        return sum(len(s.events) for s in self.sentences)

    def subset(self, sentences: Iterable[AnnotatedSentence]) -> "Corpus":
        return Corpus(list(sentences), self.schema)


def validate_sentence(sentence: AnnotatedSentence, schema: EventSchema, max_len: int | None = None) -> None:
    sid = sentence.id
    n = len(sentence.tokens)
    if n < 1:
        raise SchemaValidationError(sid, "sentence has no tokens")
    if max_len is not None and n > max_len:
        raise SchemaValidationError(sid, f"length {n} exceeds maximum {max_len}")
    seen_events = set()
    for ev in sentence.events:
        if ev.type not in schema.type_index:
            raise SchemaValidationError(sid, f"unknown event type {ev.type!r}")
        if ev.trigger.end >= n:
            raise SchemaValidationError(sid, f"trigger span {ev.trigger.as_list()} out of bounds for {n} tokens")
        legal = schema.legal_roles[ev.type]
        seen_args = set()
        for role, span in ev.arguments:
            if role not in schema.role_index:
                raise SchemaValidationError(sid, f"unknown role {role!r}")
            if role not in legal:
                raise SchemaValidationError(sid, f"role {role!r} is not legal for type {ev.type!r}")
            if span.end >= n:
                raise SchemaValidationError(sid, f"argument span {span.as_list()} out of bounds for {n} tokens")
            if (role, span) in seen_args:
                raise SchemaValidationError(sid, f"duplicate argument ({role}, {span.as_list()})")
            seen_args.add((role, span))
        k = ev.key()
        if k in seen_events:
            raise SchemaValidationError(sid, "duplicate event")
        seen_events.add(k)


def _span_from(obj, line_no: int) -> Span:
    try:
        start, end = obj
        return Span(int(start), int(end))
    except (TypeError, ValueError) as exc:
        raise CorpusParseError(line_no, f"bad span {obj!r}") from exc


def sentence_from_dict(obj: dict, line_no: int = 0) -> AnnotatedSentence:
    try:
        sid = str(obj["id"])
        tokens = obj["tokens"]
        raw_events = obj.get("events", [])
    except (KeyError, TypeError) as exc:
        raise CorpusParseError(line_no, f"missing field {exc}") from exc
    if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
        raise CorpusParseError(line_no, "tokens must be a list of strings")
    events = []
    for ev in raw_events:
        try:
            trigger = _span_from(ev["trigger"]["span"], line_no)
            args = [(str(a["role"]), _span_from(a["span"], line_no)) for a in ev.get("args", [])]
            events.append(EventRecord(str(ev["type"]), trigger, args))
        except (KeyError, TypeError) as exc:
            raise CorpusParseError(line_no, f"malformed event {ev!r}") from exc
    return AnnotatedSentence(sid, list(tokens), events)


def sentence_to_dict(sentence: AnnotatedSentence) -> dict:
    return {
        "id": sentence.id,
        "tokens": list(sentence.tokens),
        "events": [
            {
                "type": ev.type,
                "trigger": {"span": ev.trigger.as_list()},
                "args": [{"role": r, "span": s.as_list()} for r, s in ev.arguments],
            }
            for ev in sentence.events
        ],
    }


def read_jsonl(path) -> Iterable[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield line_no, json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusParseError(line_no, f"invalid JSON: {exc.msg}") from exc


def load_corpus(path, schema: EventSchema, max_len: int | None = None) -> Corpus:
    sentences = []
    for line_no, obj in read_jsonl(path):
        if not isinstance(obj, dict):
            raise CorpusParseError(line_no, "record is not an object")
        sent = sentence_from_dict(obj, line_no)
        validate_sentence(sent, schema, max_len)
        sentences.append(sent)
    return Corpus(sentences, schema)


def dumps_corpus(corpus: Corpus) -> str:
    return "".join(json.dumps(sentence_to_dict(s), ensure_ascii=False) + "\n" for s in corpus.sentences)


def save_corpus(corpus: Corpus, path) -> None:
    Path(path).write_text(dumps_corpus(corpus), encoding="utf-8")


def classify_overlap(sentence: AnnotatedSentence) -> set[str]:
    """Overlap patterns present in a sentence; the empty set marks a normal sentence."""
    patterns = set()
    trigger_types: dict[Span, set[str]] = {}
    arg_events: dict[Span, set[int]] = {}
    for idx, ev in enumerate(sentence.events):
        trigger_types.setdefault(ev.trigger, set()).add(ev.type)
        roles_per_span: dict[Span, set[str]] = {}
        for role, span in ev.arguments:
            roles_per_span.setdefault(span, set()).add(role)
            arg_events.setdefault(span, set()).add(idx)
        if any(len(rs) >= 2 for rs in roles_per_span.values()):
            patterns.add(P3)
    if any(len(ts) >= 2 for ts in trigger_types.values()):
        patterns.add(P1)
    if any(len(evs) >= 2 for evs in arg_events.values()):
        patterns.add(P2)
    return patterns


def split_sizes(n: int, ratios) -> tuple[int, ...]:
    """Floor each share, then give leftover items to the largest fractional parts.

    Ties go to the earlier split (train before validation before test).
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three positive fractions summing to 1, got {ratios}")
    exact = [n * r for r in ratios]
    sizes = [int(x + 1e-9) for x in exact]
    frac = [round(x - s, 9) for x, s in zip(exact, sizes)]
    order = sorted(range(3), key=lambda i: (-frac[i], i))
    for i in order[: n - sum(sizes)]:
        sizes[i] += 1
    return tuple(sizes)


def split_corpus(corpus: Corpus, ratios=(0.8, 0.1, 0.1), seed: int = 0) -> tuple[Corpus, Corpus, Corpus]:
    n_train, n_val, _ = split_sizes(len(corpus), ratios)
    order = list(range(len(corpus)))
    random.Random(seed).shuffle(order)
    picked = [corpus.sentences[i] for i in order]
    return (
        corpus.subset(picked[:n_train]),
        corpus.subset(picked[n_train:n_train + n_val]),
        corpus.subset(picked[n_train + n_val:]),
    )
