"""Tuple-matching P/R/F1 for trigger and argument identification/classification."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from .schema import AnnotatedSentence, Span, classify_overlap

METRICS = ("TI", "TC", "AI", "AC")
GROUPS = ("all", "overlap", "normal")


class EvaluationInputError(ValueError):
    pass


def _ratio(num: int, den: int) -> Fraction:
    return Fraction(num, den) if den else Fraction(0)


@dataclass
class Counts:
    matched: int = 0
    predicted: int = 0
    gold: int = 0

    def __iadd__(self, other: "Counts") -> "Counts":
        self.matched += other.matched
        self.predicted += other.predicted
        self.gold += other.gold
        return self

    def exact(self) -> tuple[Fraction, Fraction, Fraction]:
        """P, R, F1 as rationals; floats are rounded from these."""
        p, r = _ratio(self.matched, self.predicted), _ratio(self.matched, self.gold)
        return p, r, (2 * p * r / (p + r) if p + r else Fraction(0))

    @property
    def precision(self) -> float:
        return float(self.exact()[0])

    @property
    def recall(self) -> float:
        return float(self.exact()[1])

    @property
    def f1(self) -> float:
        return float(self.exact()[2])

    def to_dict(self) -> dict:
        return {"matched": self.matched, "predicted": self.predicted, "gold": self.gold,
                "precision": self.precision, "recall": self.recall, "f1": self.f1}


def tuple_sets(events, strict_arguments: bool = False) -> dict[str, set]:
    """Per-metric tuple sets for one sentence's events."""
    sets = {m: set() for m in METRICS}
    for ev in events:
        sets["TI"].add(ev.trigger)
        sets["TC"].add((ev.type, ev.trigger))
        for role, span in ev.arguments:
            anchor = (ev.type, ev.trigger) if strict_arguments else (ev.type,)
            sets["AI"].add(anchor + (span,))
            sets["AC"].add(anchor + (span, role))
    return sets


def sentence_counts(pred_events, gold_events, strict_arguments: bool = False) -> dict[str, Counts]:
    p = tuple_sets(pred_events, strict_arguments)
    g = tuple_sets(gold_events, strict_arguments)
    return {m: Counts(len(p[m] & g[m]), len(p[m]), len(g[m])) for m in METRICS}


@dataclass
class EvaluationReport:
    groups: dict[str, dict[str, Counts]]
    macro_type: tuple[float, float, float] = (0.0, 0.0, 0.0)
    group_sizes: dict[str, int] = field(default_factory=dict)

    @property
    def overall(self) -> dict[str, Counts]:
        return self.groups["all"]

    def to_dict(self) -> dict:
        return {
            "groups": {g: {m: c.to_dict() for m, c in ms.items()} for g, ms in self.groups.items()},
            "group_sizes": dict(self.group_sizes),
            "macro_type": dict(zip(("precision", "recall", "f1"), self.macro_type)),
        }

    def group_dict(self, group: str) -> dict:
        out = {"group": group, "sentences": self.group_sizes.get(group, 0),
               "metrics": {m: c.to_dict() for m, c in self.groups[group].items()}}
        if group == "all":
            out["macro_type"] = dict(zip(("precision", "recall", "f1"), self.macro_type))
        return out

    def table(self) -> str:
        lines = [f"{'group':<8} {'metric':<6} {'P':>7} {'R':>7} {'F1':>7} {'match':>7} {'pred':>7} {'gold':>7}"]
        for g, ms in self.groups.items():
            for m in METRICS:
                c = ms[m]
                lines.append(f"{g:<8} {m:<6} {c.precision:7.4f} {c.recall:7.4f} {c.f1:7.4f} "
                             f"{c.matched:7d} {c.predicted:7d} {c.gold:7d}")
        p, r, f = self.macro_type
        lines.append(f"{'all':<8} {'type-M':<6} {p:7.4f} {r:7.4f} {f:7.4f}")
        return "\n".join(lines)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")


def macro_type_scores(predicted: Sequence[Iterable[str]], gold: Sequence[Iterable[str]]) -> tuple[float, float, float]:
    """Sentence-level per-type P/R/F1 averaged over the types that occur in gold."""
    if len(predicted) != len(gold):
        raise EvaluationInputError("predicted and gold type sets differ in length")
    tp: dict[str, int] = {}
    fp: dict[str, int] = {}
    fn: dict[str, int] = {}
    for p, g in zip(predicted, gold):
        p, g = set(p), set(g)
        for t in p & g:
            tp[t] = tp.get(t, 0) + 1
        for t in p - g:
            fp[t] = fp.get(t, 0) + 1
        for t in g - p:
            fn[t] = fn.get(t, 0) + 1
    types = sorted({t for g in gold for t in g})
    if not types:
        return 0.0, 0.0, 0.0
    total = [Fraction(0)] * 3
    for t in types:
        c = Counts(tp.get(t, 0), tp.get(t, 0) + fp.get(t, 0), tp.get(t, 0) + fn.get(t, 0))
        total = [a + b for a, b in zip(total, c.exact())]
    k = len(types)
    return tuple(float(x / k) for x in total)


def score(predictions: Sequence[AnnotatedSentence], gold: Iterable[AnnotatedSentence],
          grouping: bool = True, strict_arguments: bool = False) -> EvaluationReport:
    """Micro P/R/F1 over TI/TC/AI/AC, overall and split by the gold sentence's overlap status."""
    gold = list(gold)
    pred_by_id = {p.id: p for p in predictions}
    gold_ids = {g.id for g in gold}
    if set(pred_by_id) != gold_ids or len(pred_by_id) != len(predictions):
        missing = sorted(gold_ids - set(pred_by_id))[:5]
        extra = sorted(set(pred_by_id) - gold_ids)[:5]
        raise EvaluationInputError(f"sentence ids differ (missing {missing}, unexpected {extra})")
    groups = {g: {m: Counts() for m in METRICS} for g in (GROUPS if grouping else ("all",))}
    sizes = {g: 0 for g in groups}
    pred_types, gold_types = [], []
    for g in gold:
        p = pred_by_id[g.id]
        counts = sentence_counts(p.events, g.events, strict_arguments)
        targets = ["all"]
        if grouping:
            targets.append("overlap" if classify_overlap(g) else "normal")
        for name in targets:
            sizes[name] += 1
            for m in METRICS:
                groups[name][m] += counts[m]
        pred_types.append({e.type for e in p.events})
        gold_types.append({e.type for e in g.events})
    return EvaluationReport(groups, macro_type_scores(pred_types, gold_types), sizes)


def shared_trigger_recall(predictions: Sequence[AnnotatedSentence], gold: Iterable[AnnotatedSentence]) -> tuple[int, int]:
    """(recovered, total) over gold trigger spans carrying two or more types.

    A span counts as recovered only when every one of its gold types is
    predicted on that exact span.
    """
    pred_by_id = {p.id: p for p in predictions}
    recovered = total = 0
    for g in gold:
        types_at: dict[Span, set[str]] = {}
        for ev in g.events:
            types_at.setdefault(ev.trigger, set()).add(ev.type)
        predicted = {(e.type, e.trigger) for e in pred_by_id[g.id].events}
        for span, types in types_at.items():
            if len(types) < 2:
                continue
            total += 1
            recovered += all((t, span) in predicted for t in types)
    return recovered, total
