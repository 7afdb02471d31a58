"""Start/end boundary probabilities to spans (nearest following end)."""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Sequence

from .schema import Span


@dataclass
class SpanTagging:
    start_probs: Sequence[float]
    end_probs: Sequence[float]
    start_threshold: float = 0.5
    end_threshold: float = 0.5

    def __post_init__(self):
        if len(self.start_probs) != len(self.end_probs):
            raise ValueError("start and end probability vectors differ in length")
        for th in (self.start_threshold, self.end_threshold):
            if not 0.0 <= th <= 1.0:
                raise ValueError(f"threshold {th} outside [0, 1]")


def assemble_spans(tagging: SpanTagging) -> list[Span]:
    """Pair each start above threshold with the first end at or after it.

    An end may close several starts; starts with no end to their right are dropped.
    """
    starts = [i for i, p in enumerate(tagging.start_probs) if p > tagging.start_threshold]
    ends = [j for j, p in enumerate(tagging.end_probs) if p > tagging.end_threshold]
    spans = []
    for i in starts:
        k = bisect.bisect_left(ends, i)
        if k < len(ends):
            spans.append(Span(i, ends[k]))
    return spans


def decode_spans(start_probs, end_probs, start_threshold: float = 0.5, end_threshold: float = 0.5) -> list[Span]:
    return assemble_spans(SpanTagging(start_probs, end_probs, start_threshold, end_threshold))


def boundary_labels(spans, length: int) -> tuple[list[int], list[int]]:
    """0/1 start and end label vectors for a set of gold spans."""
    start = [0] * length
    end = [0] * length
    for sp in spans:
        start[sp.start] = 1
        end[sp.end] = 1
    return start, end
