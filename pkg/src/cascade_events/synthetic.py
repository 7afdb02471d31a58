"""Seeded generator of small annotated corpora with controlled overlap patterns.

Lexicon layout: every event type owns a few trigger tokens, every unordered
pair of types owns one shared trigger token (P1), every role owns a small
token pool from which argument spans are drawn, and each type owns a pool of
"dual" tokens whose spans fill two of its legal roles at once (P3). The
remaining vocabulary is filler drawn uniformly between spans.

Whenever two events share a sentence, each event's private arguments use
roles that are legal for its own type only, so argument attribution is
decidable from the type condition alone.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass

from .schema import P1, P2, P3, AnnotatedSentence, Corpus, EventRecord, EventSchema, Span, classify_overlap

NORMAL = "normal"


class GeneratorConfigError(ValueError):
    pass


@dataclass
class GeneratorConfig:
    vocab_size: int = 200
    n_types: int = 6
    n_roles: int = 10
    legal_density: float = 0.5
    min_len: int = 10
    max_len: int = 30
    n_sentences: int = 1000
    mix: tuple[float, float, float, float] = (0.15, 0.15, 0.10, 0.60)  # P1, P2, P3, normal
    seed: int = 0
    triggers_per_type: int = 2
    tokens_per_role: int = 4
    dual_tokens_per_type: int = 2
    max_span_len: int = 3
    two_event_normal: float = 0.25

    def validate(self) -> None:
        if self.n_types < 2 or self.n_roles < 2:
            raise GeneratorConfigError("need at least 2 types and 2 roles")
        if len(self.mix) != 4 or any(f < 0 for f in self.mix) or sum(self.mix) > 1 + 1e-9:
            raise GeneratorConfigError(f"overlap mix must be 4 nonnegative fractions summing to <= 1, got {self.mix}")
        if not 0 < self.legal_density <= 1:
            raise GeneratorConfigError("legal_density must lie in (0, 1]")
        if not 1 <= self.min_len <= self.max_len:
            raise GeneratorConfigError("need 1 <= min_len <= max_len")
        if self.n_sentences < 0:
            raise GeneratorConfigError("n_sentences must be >= 0")


class Lexicon:
    def __init__(self, config: GeneratorConfig, schema: EventSchema, rng: random.Random):
        self.trigger = {t: [f"trg{ti}_{k}" for k in range(config.triggers_per_type)]
                        for ti, t in enumerate(schema.types)}
        self.pair_trigger = {}
        for (ai, a), (bi, b) in itertools.combinations(enumerate(schema.types), 2):
            self.pair_trigger[frozenset((a, b))] = f"trg{ai}+{bi}"
        self.role = {r: [f"arg{ri}_{k}" for k in range(config.tokens_per_role)]
                     for ri, r in enumerate(schema.roles)}
        self.dual_roles: dict[str, tuple[str, str]] = {}
        self.dual = {}
        for ti, t in enumerate(schema.types):
            legal = schema.legal_roles[t]
            if len(legal) >= 2:
                self.dual_roles[t] = tuple(rng.sample(legal, 2))
                self.dual[t] = [f"dual{ti}_{k}" for k in range(config.dual_tokens_per_type)]
        reserved = (sum(len(v) for v in self.trigger.values()) + len(self.pair_trigger)
                    + sum(len(v) for v in self.role.values()) + sum(len(v) for v in self.dual.values()))
        n_filler = config.vocab_size - reserved
        if n_filler < 10:
            raise GeneratorConfigError(
                f"vocab_size {config.vocab_size} leaves {n_filler} filler tokens; need at least {reserved + 10}")
        self.filler = [f"w{k}" for k in range(n_filler)]

    def all_tokens(self) -> list[str]:
        out = [tok for v in self.trigger.values() for tok in v]
        out += list(self.pair_trigger.values())
        out += [tok for v in self.role.values() for tok in v]
        out += [tok for v in self.dual.values() for tok in v]
        return out + self.filler


def make_schema(config: GeneratorConfig, rng: random.Random) -> EventSchema:
    types = [f"Type{i}" for i in range(config.n_types)]
    roles = [f"role{i}" for i in range(config.n_roles)]
    k = max(1, min(config.n_roles, round(config.legal_density * config.n_roles)))
    legal = {t: sorted(rng.sample(roles, k), key=roles.index) for t in types}
    return EventSchema(types, roles, legal)


def _private(schema: EventSchema, a: str, b: str) -> list[str]:
    return [r for r in schema.legal_roles[a] if r not in schema.legal_roles[b]]


def _shared(schema: EventSchema, a: str, b: str) -> list[str]:
    return [r for r in schema.legal_roles[a] if r in schema.legal_roles[b]]


@dataclass
class _Chunk:
    tokens: list[str]
    # (event index, "trigger" | role name)
    labels: list[tuple[int, str]]


class SyntheticCorpusGenerator:
    def __init__(self, config: GeneratorConfig):
        config.validate()
        self.config = config
        self.rng = random.Random(config.seed)
        self.schema = make_schema(config, self.rng)
        self.lexicon = Lexicon(config, self.schema, self.rng)
        s = self.schema
        ordered = list(itertools.permutations(s.types, 2))
        self.p1_pairs = [(a, b) for a, b in itertools.combinations(s.types, 2)
                         if _private(s, a, b) and _private(s, b, a)]
        self.p2_pairs = [(a, b) for a, b in ordered
                         if _shared(s, a, b) and _private(s, a, b) and _private(s, b, a)]
        self.p3_types = list(self.lexicon.dual)
        p1, p2, p3, _ = config.mix
        if p1 > 0 and not self.p1_pairs:
            raise GeneratorConfigError("P1 requested but no type pair has private roles on both sides")
        if p2 > 0 and not self.p2_pairs:
            raise GeneratorConfigError("P2 requested but no type pair shares a role while keeping private ones")
        if p3 > 0 and not self.p3_types:
            raise GeneratorConfigError("P3 requested but every type has a single legal role")

    # ------------------------------------------------------------ pieces
    def _arg_span(self, role: str) -> list[str]:
        n = self.rng.randint(1, self.config.max_span_len)
        return [self.rng.choice(self.lexicon.role[role]) for _ in range(n)]

    def _args(self, ev: int, roles: list[str], lo: int, hi: int) -> list[_Chunk]:
        hi = min(hi, len(roles))
        lo = min(lo, hi)
        picked = self.rng.sample(roles, self.rng.randint(lo, hi))
        return [_Chunk(self._arg_span(r), [(ev, r)]) for r in picked]

    def _normal(self):
        s = self.schema
        pairs = self.p1_pairs
        if pairs and self.rng.random() < self.config.two_event_normal:
            a, b = self.rng.choice(pairs)
            types = [a, b]
            chunks = [_Chunk([self.rng.choice(self.lexicon.trigger[a])], [(0, "trigger")]),
                      _Chunk([self.rng.choice(self.lexicon.trigger[b])], [(1, "trigger")])]
            chunks += self._args(0, _private(s, a, b), 1, 2)
            chunks += self._args(1, _private(s, b, a), 1, 2)
            return types, chunks
        t = self.rng.choice(s.types)
        chunks = [_Chunk([self.rng.choice(self.lexicon.trigger[t])], [(0, "trigger")])]
        chunks += self._args(0, s.legal_roles[t], 1, 3)
        return [t], chunks

    def _p1(self):
        s = self.schema
        a, b = self.rng.choice(self.p1_pairs)
        chunks = [_Chunk([self.lexicon.pair_trigger[frozenset((a, b))]], [(0, "trigger"), (1, "trigger")])]
        chunks += self._args(0, _private(s, a, b), 1, 2)
        chunks += self._args(1, _private(s, b, a), 1, 2)
        return [a, b], chunks

    def _p2(self):
        s = self.schema
        a, b = self.rng.choice(self.p2_pairs)
        chunks = [_Chunk([self.rng.choice(self.lexicon.trigger[a])], [(0, "trigger")]),
                  _Chunk([self.rng.choice(self.lexicon.trigger[b])], [(1, "trigger")])]
        role = self.rng.choice(_shared(s, a, b))
        chunks.append(_Chunk(self._arg_span(role), [(0, role), (1, role)]))
        chunks += self._args(0, _private(s, a, b), 0, 1)
        chunks += self._args(1, _private(s, b, a), 0, 1)
        return [a, b], chunks

    def _p3(self):
        s = self.schema
        t = self.rng.choice(self.p3_types)
        r1, r2 = self.lexicon.dual_roles[t]
        n = self.rng.randint(1, self.config.max_span_len)
        dual = [self.rng.choice(self.lexicon.dual[t]) for _ in range(n)]
        chunks = [_Chunk([self.rng.choice(self.lexicon.trigger[t])], [(0, "trigger")]),
                  _Chunk(dual, [(0, r1), (0, r2)])]
        others = [r for r in s.legal_roles[t] if r not in (r1, r2)]
        chunks += self._args(0, others, 0, 2)
        return [t], chunks

    def _layout(self, sid: str, types: list[str], chunks: list[_Chunk]) -> AnnotatedSentence:
        cfg = self.config
        rng = self.rng
        # drop optional argument chunks until the sentence fits
        while sum(len(c.tokens) for c in chunks) + len(chunks) - 1 > cfg.max_len:
            droppable = [i for i, c in enumerate(chunks)
                         if all(lab != "trigger" for _, lab in c.labels) and len(c.labels) == 1]
            if not droppable:
                raise GeneratorConfigError(f"max_len {cfg.max_len} too small for a {types} sentence")
            chunks.pop(droppable[-1])
        rng.shuffle(chunks)
        content = sum(len(c.tokens) for c in chunks)
        needed = content + len(chunks) - 1
        length = rng.randint(max(cfg.min_len, needed), cfg.max_len)
        gaps = [0] + [1] * (len(chunks) - 1) + [0]
        for _ in range(length - needed):
            gaps[rng.randrange(len(gaps))] += 1
        tokens: list[str] = []
        events = [EventRecord(t, Span(0, 0), []) for t in types]
        for gap, chunk in zip(gaps, chunks):
            tokens += [rng.choice(self.lexicon.filler) for _ in range(gap)]
            span = Span(len(tokens), len(tokens) + len(chunk.tokens) - 1)
            tokens += chunk.tokens
            for ev, label in chunk.labels:
                if label == "trigger":
                    events[ev].trigger = span
                else:
                    events[ev].arguments.append((label, span))
        tokens += [rng.choice(self.lexicon.filler) for _ in range(gaps[-1])]
        for ev in events:
            ev.arguments.sort(key=lambda a: (a[1], a[0]))
        return AnnotatedSentence(sid, tokens, events)

    def generate_labeled(self) -> tuple[Corpus, list[set[str]]]:
        cfg = self.config
        n = cfg.n_sentences
        counts = [int(f * n + 1e-9) for f in cfg.mix[:3]]
        plan = [P1] * counts[0] + [P2] * counts[1] + [P3] * counts[2]
        plan += [NORMAL] * (n - len(plan))
        self.rng.shuffle(plan)
        builders = {P1: self._p1, P2: self._p2, P3: self._p3, NORMAL: self._normal}
        sentences, intended = [], []
        for i, kind in enumerate(plan):
            types, chunks = builders[kind]()
            sentences.append(self._layout(f"syn-{cfg.seed}-{i:06d}", types, chunks))
            intended.append(set() if kind == NORMAL else {kind})
        return Corpus(sentences, self.schema), intended


def generate(config: GeneratorConfig) -> Corpus:
    return SyntheticCorpusGenerator(config).generate_labeled()[0]


def generate_splits(config: GeneratorConfig, sizes: tuple[int, int, int]) -> tuple[Corpus, Corpus, Corpus]:
    """One corpus of ``sum(sizes)`` sentences cut into consecutive train/dev/test pieces."""
    total = sum(sizes)
    corpus = generate(GeneratorConfig(**{**config.__dict__, "n_sentences": total}))
    a, b = sizes[0], sizes[0] + sizes[1]
    s = corpus.sentences
    return corpus.subset(s[:a]), corpus.subset(s[a:b]), corpus.subset(s[b:])


def verify(corpus: Corpus, intended: list[set[str]]) -> list[str]:
    """Ids of sentences whose realized overlap pattern differs from the plan."""
    return [s.id for s, want in zip(corpus.sentences, intended) if classify_overlap(s) != want]
