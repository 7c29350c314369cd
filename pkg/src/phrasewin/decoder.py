"""Turn scored, typed proposals into a crossing-free phrase forest."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from phrasewin.annotation import (
    ATOMIC_TYPES,
    AnnotatedSentence,
    PhraseNode,
    PhraseType,
    Span,
)


class IncompatibleSet(ValueError):
    pass


class TooLarge(ValueError):
    pass


@dataclass(frozen=True)
class ScoredPhrase:
    span: Span
    kind: PhraseType
    score: float

    def __post_init__(self):
        if self.span.start < 1 or self.span.end < self.span.start:
            raise ValueError(f"invalid span {self.span}")
        if not math.isfinite(self.score):
            raise ValueError("score must be finite")


def compatible(a: Span, b: Span) -> bool:
    """Nested or disjoint, and not the same span."""
    return a != b and not a.crosses(b)


def dedup_proposals(props: Iterable[ScoredPhrase]) -> list[ScoredPhrase]:
    """Keep the best proposal per span (ties go to the lower type code)."""
    best: dict[Span, ScoredPhrase] = {}
    for p in props:
        cur = best.get(p.span)
        if cur is None or (p.score, -p.kind) > (cur.score, -cur.kind):
            best[p.span] = p
    return sorted(best.values(), key=lambda p: -p.score)


def _greedy_order(p: ScoredPhrase):
    return (-p.score, -len(p.span), p.span.start)


def select_forest_greedy(props: Sequence[ScoredPhrase]) -> list[ScoredPhrase]:
    accepted: list[ScoredPhrase] = []
    for p in sorted(props, key=_greedy_order):
        if all(compatible(p.span, q.span) for q in accepted):
            accepted.append(p)
    return accepted


def brute_force_select(props: Sequence[ScoredPhrase], max_props: int = 20) -> list[ScoredPhrase]:
    """Highest-scoring compatible subset by exhaustive search.

    Enumerates every compatible subset (incompatible branches are cut as soon
    as a conflict appears, which removes no feasible subset). Ties go to the
    lexicographically smallest tuple of input indices.
    """
    k = len(props)
    if k > max_props:
        raise TooLarge(f"{k} proposals exceeds the exhaustive limit of {max_props}")
    spans = [p.span for p in props]
    ok = [[compatible(spans[i], spans[j]) for j in range(k)] for i in range(k)]
    best_score = -math.inf
    best: tuple[int, ...] = ()

    def visit(i: int, chosen: list[int]) -> None:
        nonlocal best_score, best
        if i == k:
            score = sum(props[j].score for j in chosen)
            cand = tuple(chosen)
            if score > best_score or (score == best_score and cand < best):
                best_score, best = score, cand
            return
        if all(ok[i][j] for j in chosen):
            chosen.append(i)
            visit(i + 1, chosen)
            chosen.pop()
        visit(i + 1, chosen)

    visit(0, [])
    return [props[j] for j in best]


@dataclass(frozen=True)
class DecodeWarning:
    span: Span
    message: str


def build_forest(
    selected: Iterable[ScoredPhrase], chars: str, warnings: list | None = None
) -> AnnotatedSentence:
    """Nest a crossing-free set of phrases by containment.

    Phrases found inside a conjunction or modal phrase are dropped, and a
    ``DecodeWarning`` is appended to ``warnings`` when given.
    """
    items = sorted(selected, key=lambda p: (p.span.start, -p.span.end))
    n = len(chars)
    for p in items:
        if not p.span.valid_for(n):
            raise IncompatibleSet(f"span {p.span} outside sentence of length {n}")

    # each frame: (phrase, children list)
    roots: list[tuple[ScoredPhrase, list]] = []
    stack: list[tuple[ScoredPhrase, list]] = []
    for p in items:
        while stack and stack[-1][0].span.end < p.span.start:
            stack.pop()
        if stack:
            parent = stack[-1][0].span
            if parent == p.span:
                raise IncompatibleSet(f"duplicate span {p.span}")
            if not parent.contains(p.span):
                raise IncompatibleSet(f"{p.span} crosses {parent}")
        frame = (p, [])
        (stack[-1][1] if stack else roots).append(frame)
        stack.append(frame)

    def to_node(frame) -> PhraseNode:
        p, kids = frame
        if p.kind in ATOMIC_TYPES and kids:
            if warnings is not None:
                warnings.append(
                    DecodeWarning(p.span, f"dropped {len(kids)} phrase(s) nested in {p.kind.label}")
                )
            kids = []
        return PhraseNode(p.kind, p.span, tuple(to_node(k) for k in kids))

    return AnnotatedSentence(chars, tuple(to_node(f) for f in roots))


def decode(props: Iterable[ScoredPhrase], chars: str, warnings: list | None = None) -> AnnotatedSentence:
    return build_forest(select_forest_greedy(dedup_proposals(props)), chars, warnings)
