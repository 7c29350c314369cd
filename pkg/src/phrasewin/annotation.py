"""Bracket notation for nested, typed phrase windows.

Seven phrase types, each with its own delimiter pair::

    (...)  noun        [...]  verb        {...}  quantity
    <...>  preposition #...#  conjunction @...@  modal
    /...\\  clause (``^...^`` is accepted on input)

Conjunction and modal phrases share one character for opening and closing,
so they are atomic: nothing may be nested inside them.

Character positions are 1-based, inclusive, and count Unicode scalar values.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterator


class PhraseType(enum.IntEnum):
    NOUN = 0
    VERB = 1
    QUANTITY = 2
    PREPOSITION = 3
    CONJUNCTION = 4
    MODAL = 5
    CLAUSE = 6

    @property
    def label(self) -> str:
        return _LABELS[self]

    @classmethod
    def from_label(cls, label: str) -> "PhraseType":
        try:
            return _BY_LABEL[label]
        except KeyError:
            raise ValueError(f"unknown phrase type {label!r}") from None


_LABELS = {
    PhraseType.NOUN: "Noun",
    PhraseType.VERB: "Verb",
    PhraseType.QUANTITY: "Quantity",
    PhraseType.PREPOSITION: "Prep",
    PhraseType.CONJUNCTION: "Conj",
    PhraseType.MODAL: "Modal",
    PhraseType.CLAUSE: "Clause",
}
_BY_LABEL = {v: k for k, v in _LABELS.items()}
_BY_LABEL.update({t.name.capitalize(): t for t in PhraseType})

ATOMIC_TYPES = frozenset({PhraseType.CONJUNCTION, PhraseType.MODAL})

# canonical (open, close) per type
DELIMITERS = {
    PhraseType.NOUN: ("(", ")"),
    PhraseType.VERB: ("[", "]"),
    PhraseType.QUANTITY: ("{", "}"),
    PhraseType.PREPOSITION: ("<", ">"),
    PhraseType.CONJUNCTION: ("#", "#"),
    PhraseType.MODAL: ("@", "@"),
    PhraseType.CLAUSE: ("/", "\\"),
}

_OPENERS = {
    "(": (PhraseType.NOUN, ")"),
    "[": (PhraseType.VERB, "]"),
    "{": (PhraseType.QUANTITY, "}"),
    "<": (PhraseType.PREPOSITION, ">"),
    "/": (PhraseType.CLAUSE, "\\"),
}
_CLOSERS = frozenset(")]}>\\")
_SYMMETRIC = {
    "#": PhraseType.CONJUNCTION,
    "@": PhraseType.MODAL,
    "^": PhraseType.CLAUSE,
}
DELIMITER_CHARS = frozenset(_OPENERS) | _CLOSERS | frozenset(_SYMMETRIC)


class AnnotationError(ValueError):
    """Base class for notation parse failures."""

    def __init__(self, message: str, position: int | None = None):
        self.position = position
        if position is not None:
            message = f"{message} at offset {position}"
        super().__init__(message)


class UnbalancedDelimiter(AnnotationError):
    pass


class IllegalNesting(AnnotationError):
    pass


class NestedAtomic(AnnotationError):
    pass


class EmptyPhrase(AnnotationError):
    pass


class InvariantViolation(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Span:
    start: int
    end: int

    def __len__(self) -> int:
        return self.end - self.start + 1

    def contains(self, other: "Span") -> bool:
        return self.start <= other.start and other.end <= self.end

    def disjoint(self, other: "Span") -> bool:
        return self.end < other.start or other.end < self.start

    def crosses(self, other: "Span") -> bool:
        return not (self.disjoint(other) or self.contains(other) or other.contains(self))

    def valid_for(self, n: int) -> bool:
        return 1 <= self.start <= self.end <= n


@dataclass(frozen=True)
class PhraseNode:
    kind: PhraseType
    span: Span
    children: tuple["PhraseNode", ...] = ()

    def walk(self, depth: int = 0) -> Iterator[tuple["PhraseNode", int]]:
        yield self, depth
        for child in self.children:
            yield from child.walk(depth + 1)


@dataclass(frozen=True)
class AnnotatedSentence:
    chars: str
    roots: tuple[PhraseNode, ...] = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.chars)

    def walk(self) -> Iterator[tuple[PhraseNode, int]]:
        for root in self.roots:
            yield from root.walk()

    def depth(self) -> int:
        """Maximum nesting depth; 0 for an unannotated sentence."""
        return max((d + 1 for _, d in self.walk()), default=0)

    def text(self, span: Span) -> str:
        return self.chars[span.start - 1 : span.end]


class _Open:
    __slots__ = ("kind", "closer", "offset", "start", "children")

    def __init__(self, kind, closer, offset, start):
        self.kind = kind
        self.closer = closer
        self.offset = offset
        self.start = start
        self.children = []


def parse_annotation(text: str) -> AnnotatedSentence:
    chars: list[str] = []
    roots: list[PhraseNode] = []
    stack: list[_Open] = []

    def close(offset: int) -> None:
        top = stack.pop()
        end = len(chars)
        if end < top.start:
            raise EmptyPhrase("phrase encloses no characters", top.offset)
        span = Span(top.start, end)
        if len(top.children) == 1 and top.children[0].span == span:
            raise IllegalNesting("child phrase spans its whole parent", offset)
        node = PhraseNode(top.kind, span, tuple(top.children))
        (stack[-1].children if stack else roots).append(node)

    for offset, ch in enumerate(text):
        in_atomic = bool(stack) and stack[-1].kind in ATOMIC_TYPES
        if ch in _SYMMETRIC:
            kind = _SYMMETRIC[ch]
            if stack and stack[-1].closer == ch:
                close(offset)
            elif in_atomic:
                raise NestedAtomic(f"delimiter {ch!r} inside atomic phrase", offset)
            else:
                stack.append(_Open(kind, ch, offset, len(chars) + 1))
        elif ch in _OPENERS:
            if in_atomic:
                raise NestedAtomic(f"delimiter {ch!r} inside atomic phrase", offset)
            kind, closer = _OPENERS[ch]
            stack.append(_Open(kind, closer, offset, len(chars) + 1))
        elif ch in _CLOSERS:
            if not stack:
                raise UnbalancedDelimiter(f"unmatched {ch!r}", offset)
            if in_atomic:
                raise NestedAtomic(f"delimiter {ch!r} inside atomic phrase", offset)
            if stack[-1].closer != ch:
                if any(o.closer == ch for o in stack):
                    raise IllegalNesting(
                        f"{ch!r} closes an outer phrase before its child ends", offset
                    )
                raise UnbalancedDelimiter(f"unmatched {ch!r}", offset)
            close(offset)
        else:
            chars.append(ch)

    if stack:
        raise UnbalancedDelimiter(f"unclosed {_opener_of(stack[-1])!r}", stack[-1].offset)
    return AnnotatedSentence("".join(chars), tuple(roots))


def _opener_of(o: _Open) -> str:
    if o.closer in _SYMMETRIC:
        return o.closer
    return DELIMITERS[o.kind][0]


def serialize_annotation(s: AnnotatedSentence) -> str:
    violations = validate_tree(s)
    if violations:
        raise InvariantViolation("; ".join(str(v) for v in violations))
    out: list[str] = []
    _emit(s.chars, s.roots, 1, len(s.chars), out)
    return "".join(out)


def _emit(chars: str, nodes, lo: int, hi: int, out: list[str]) -> None:
    pos = lo
    for node in nodes:
        out.append(chars[pos - 1 : node.span.start - 1])
        opener, closer = DELIMITERS[node.kind]
        out.append(opener)
        _emit(chars, node.children, node.span.start, node.span.end, out)
        out.append(closer)
        pos = node.span.end + 1
    out.append(chars[pos - 1 : hi])


def flatten_phrases(s: AnnotatedSentence) -> list[tuple[Span, PhraseType]]:
    """All phrases, outer before inner, ordered by (start, -end, depth)."""
    items = [(node.span, node.kind, depth) for node, depth in s.walk()]
    items.sort(key=lambda t: (t[0].start, -t[0].end, t[2]))
    return [(span, kind) for span, kind, _ in items]


@dataclass(frozen=True)
class Violation:
    rule: str
    span: Span | None
    message: str

    def __str__(self) -> str:
        where = f" at ({self.span.start},{self.span.end})" if self.span else ""
        return f"{self.rule}{where}: {self.message}"


def validate_tree(s: AnnotatedSentence, max_length: int | None = None) -> list[Violation]:
    """Structural checks over a sentence; returns violations, never raises."""
    out: list[Violation] = []
    n = len(s.chars)
    if max_length is not None and n > max_length:
        out.append(Violation("MaxLength", None, f"{n} characters exceeds {max_length}"))
    _check_level(s.roots, None, n, out)
    return out


def _check_level(nodes, parent: PhraseNode | None, n: int, out: list[Violation]) -> None:
    prev: PhraseNode | None = None
    for node in nodes:
        span = node.span
        if not span.valid_for(n):
            out.append(Violation("SpanOutOfRange", span, f"outside 1..{n}"))
        if parent is not None:
            if not parent.span.contains(span):
                out.append(Violation("IllegalNesting", span, "child escapes its parent"))
            elif span == parent.span:
                out.append(Violation("IllegalNesting", span, "child equals its parent span"))
        if prev is not None:
            if prev.span.start > span.start:
                out.append(Violation("UnsortedSiblings", span, "siblings out of order"))
            if not prev.span.disjoint(span):
                rule = "DuplicateSpan" if prev.span == span else "CrossingSiblings"
                out.append(
                    Violation(rule, span, f"overlaps sibling ({prev.span.start},{prev.span.end})")
                )
        if node.kind in ATOMIC_TYPES and node.children:
            out.append(Violation("NestedAtomic", span, f"{node.kind.label} phrase has children"))
        _check_level(node.children, node, n, out)
        prev = node
