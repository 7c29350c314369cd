"""Anchor windows over a sentence, boundary offsets, and training labels.

Every sub-window ``(x, y)`` with ``1 <= x <= y <= n`` is an anchor. Anchors
are ordered by start, then end, which gives each one a dense index.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from phrasewin.annotation import PhraseType, Span


class OutOfRange(IndexError):
    pass


@dataclass(frozen=True)
class Offset:
    dx: int
    dy: int

    def __post_init__(self):
        if self.dx not in (-1, 0, 1) or self.dy not in (-1, 0, 1):
            raise ValueError(f"offset components must be in {{-1, 0, 1}}, got {self}")

    @property
    def magnitude(self) -> int:
        return abs(self.dx) + abs(self.dy)


ZERO = Offset(0, 0)
# start shifted or end shifted by one character, never both
CROSS_PATTERN = frozenset({ZERO, Offset(-1, 0), Offset(1, 0), Offset(0, -1), Offset(0, 1)})
# a one-character window can only grow: shrinking either end would invert it
SINGLE_PATTERN = frozenset({ZERO, Offset(-1, 0), Offset(0, 1)})


@dataclass(frozen=True)
class AnchorLabel:
    positive: bool
    target_offset: Offset | None = None
    gold_type: PhraseType | None = None
    gold_span: Span | None = None


NEGATIVE = AnchorLabel(False)


def window_count(n: int) -> int:
    if n < 0:
        raise ValueError("sentence length must be non-negative")
    return n * (n + 1) // 2


def enumerate_anchors(n: int) -> list[Span]:
    return [Span(x, y) for x in range(1, n + 1) for y in range(x, n + 1)]


def anchor_index(span: Span, n: int) -> int:
    if not span.valid_for(n):
        raise OutOfRange(f"span {span} invalid for length {n}")
    x, y = span.start, span.end
    # windows starting before x: sum_{k=1}^{x-1} (n - k + 1)
    return (x - 1) * n - (x - 1) * (x - 2) // 2 + (y - x)


def index_to_span(i: int, n: int) -> Span:
    if not 0 <= i < window_count(n):
        raise OutOfRange(f"index {i} outside 0..{window_count(n) - 1}")
    x = 1
    row = n
    while i >= row:
        i -= row
        x += 1
        row -= 1
    return Span(x, x + i)


def anchor_arrays(n: int) -> tuple[np.ndarray, np.ndarray]:
    """0-based start and end indices of every anchor, in canonical order."""
    starts, ends = np.triu_indices(n)
    return starts.astype(np.intp), ends.astype(np.intp)


def apply_offset(span: Span, off: Offset, n: int) -> Span | None:
    """Shift a window's boundaries; ``None`` if the result is not a window."""
    moved = Span(span.start + off.dx, span.end + off.dy)
    return moved if moved.valid_for(n) else None


def allowed_offsets(window_len: int) -> frozenset[Offset]:
    """Offsets a window of ``window_len`` characters may carry."""
    if window_len < 1:
        raise ValueError("window length must be at least 1")
    return CROSS_PATTERN if window_len >= 2 else SINGLE_PATTERN


def label_anchors(gold: Iterable[tuple[Span, PhraseType]], n: int) -> dict[int, AnchorLabel]:
    """Map every anchor index to its label.

    An anchor is positive for a gold phrase when one of the offsets allowed
    for the anchor's length carries it exactly onto the phrase. So a phrase
    of two or more characters has at most five positive anchors and a
    one-character phrase at most three. Conflicts go to the exact match,
    then the smaller shift, then the earlier gold phrase.
    """
    best: dict[int, tuple[tuple[int, int, int], AnchorLabel]] = {}
    for order, (gspan, gtype) in enumerate(gold):
        for off in CROSS_PATTERN:
            anchor = Span(gspan.start - off.dx, gspan.end - off.dy)
            if not anchor.valid_for(n) or off not in allowed_offsets(len(anchor)):
                continue
            idx = anchor_index(anchor, n)
            rank = (0 if off == ZERO else 1, off.magnitude, order)
            if idx not in best or rank < best[idx][0]:
                best[idx] = (rank, AnchorLabel(True, off, gtype, gspan))
    labels = {i: NEGATIVE for i in range(window_count(n))}
    for idx, (_, lab) in best.items():
        labels[idx] = lab
    return labels


def sample_training_anchors(
    labels: Mapping[int, AnchorLabel], neg_ratio: float, seed
) -> list[int]:
    """All positives plus ``ceil(neg_ratio * #pos)`` uniformly drawn negatives.

    ``seed`` may be an int or a ``numpy.random.Generator``. With no positives,
    up to four negatives are drawn so the sentence still contributes a batch.
    """
    if neg_ratio <= 0:
        raise ValueError("neg_ratio must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    pos = sorted(i for i, lab in labels.items() if lab.positive)
    neg = sorted(i for i, lab in labels.items() if not lab.positive)
    want = math.ceil(neg_ratio * len(pos)) if pos else 4
    want = min(want, len(neg))
    chosen = rng.choice(len(neg), size=want, replace=False) if want else []
    return pos + sorted(neg[j] for j in chosen)
