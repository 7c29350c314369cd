"""Corpus files, validation, splits, and a synthetic sentence generator.

A corpus file is UTF-8 text with one annotated sentence per line.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from phrasewin.annotation import (
    DELIMITER_CHARS,
    DELIMITERS,
    AnnotatedSentence,
    AnnotationError,
    PhraseType,
    parse_annotation,
    serialize_annotation,
    validate_tree,
)

MAX_SENTENCE_LENGTH = 50


class EmptyCorpus(ValueError):
    pass


class InvalidRatios(ValueError):
    pass


class GrammarUnproductive(RuntimeError):
    pass


@dataclass
class Corpus:
    sentences: list[AnnotatedSentence]
    provenance: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)

    def __getitem__(self, i):
        return self.sentences[i]


@dataclass(frozen=True)
class Diagnostic:
    line: int
    rule: str
    message: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.rule}: {self.message}"


def check_line(text: str, lineno: int) -> tuple[AnnotatedSentence | None, list[Diagnostic]]:
    try:
        sent = parse_annotation(text)
    except AnnotationError as exc:
        return None, [Diagnostic(lineno, type(exc).__name__, str(exc))]
    if not sent.chars:
        return None, [Diagnostic(lineno, "EmptySentence", "line has no characters")]
    problems = validate_tree(sent, max_length=MAX_SENTENCE_LENGTH)
    if problems:
        return None, [Diagnostic(lineno, v.rule, str(v)) for v in problems]
    return sent, []


def read_lines(path) -> list[str]:
    with open(path, encoding="utf-8", newline="") as fh:
        return [line.rstrip("\n").rstrip("\r") for line in fh]


def load_corpus(path) -> tuple[Corpus, list[Diagnostic]]:
    """Parse and validate every line; failing lines are skipped and reported.

    Blank lines are ignored. Raises ``EmptyCorpus`` when nothing valid remains.
    """
    sentences, diags = [], []
    for lineno, line in enumerate(read_lines(path), start=1):
        if not line.strip():
            continue
        sent, problems = check_line(line, lineno)
        diags.extend(problems)
        if sent is not None:
            sentences.append(sent)
    if not sentences:
        raise EmptyCorpus(f"{path}: no valid sentences")
    return Corpus(sentences, {"path": str(path)}), diags


def save_corpus(corpus: Corpus | Sequence[AnnotatedSentence], path) -> None:
    sentences = list(corpus)
    if not sentences:
        raise EmptyCorpus("refusing to write an empty corpus")
    text = "".join(serialize_annotation(s) + "\n" for s in sentences)
    Path(path).write_bytes(text.encode("utf-8"))


def split_corpus(corpus: Corpus, ratios: Sequence[float], seed: int) -> tuple[Corpus, Corpus, Corpus]:
    """Shuffled train/dev/test partition; dev and test get ``floor(r * n)``."""
    if len(ratios) != 3 or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise InvalidRatios(f"ratios must be three positive numbers summing to 1, got {list(ratios)}")
    n = len(corpus)
    order = np.random.default_rng(seed).permutation(n)
    n_dev = math.floor(ratios[1] * n)
    n_test = math.floor(ratios[2] * n)
    n_train = n - n_dev - n_test
    parts = (order[:n_train], order[n_train : n_train + n_dev], order[n_train + n_dev :])
    out = []
    for name, idx in zip(("train", "dev", "test"), parts):
        prov = {**corpus.provenance, "split": name, "split_seed": seed}
        out.append(Corpus([corpus.sentences[i] for i in idx], prov))
    return tuple(out)


# --------------------------------------------------------------------------
# synthetic grammar

PHRASE_SYMBOLS = {
    "NP": PhraseType.NOUN,
    "VP": PhraseType.VERB,
    "QP": PhraseType.QUANTITY,
    "PP": PhraseType.PREPOSITION,
    "CONJ": PhraseType.CONJUNCTION,
    "MOD": PhraseType.MODAL,
    "CL": PhraseType.CLAUSE,
}


@dataclass(frozen=True)
class Rule:
    lhs: str
    rhs: tuple[str, ...]
    weight: float


@dataclass
class SynthGrammar:
    """Weighted productions over phrase nonterminals and a typed lexicon.

    Right-hand-side symbols are nonterminals (any rule's lhs), lexicon
    categories (a token is drawn uniformly), or literal text. Nonterminals in
    ``PHRASE_SYMBOLS`` become phrase nodes; others (such as ``S``) are
    transparent. ``max_depth`` caps phrase nesting.
    """

    rules: list[Rule]
    lexicon: dict[str, list[str]]
    max_depth: int = 4
    start: str = "S"

    def __post_init__(self):
        if not self.rules:
            raise ValueError("grammar has no rules")
        if any(r.weight <= 0 for r in self.rules):
            raise ValueError("rule weights must be positive")
        if self.max_depth < 0:
            raise ValueError("max_depth must be non-negative")
        if self.start not in {r.lhs for r in self.rules}:
            raise ValueError(f"start symbol {self.start!r} has no rules")
        for cat, toks in self.lexicon.items():
            if not toks:
                raise ValueError(f"lexicon category {cat!r} is empty")
            bad = [t for t in toks if not t or set(t) & DELIMITER_CHARS]
            if bad:
                raise ValueError(f"lexicon tokens {bad} are empty or contain delimiters")
        nonterminals = {r.lhs for r in self.rules}
        for r in self.rules:
            for sym in r.rhs:
                if sym not in nonterminals and sym not in self.lexicon and set(sym) & DELIMITER_CHARS:
                    raise ValueError(f"literal {sym!r} contains a delimiter character")

    @property
    def nonterminals(self) -> set[str]:
        return {r.lhs for r in self.rules}

    @classmethod
    def from_dict(cls, d: dict) -> "SynthGrammar":
        rules = [Rule(r["lhs"], tuple(r["rhs"]), float(r.get("weight", 1.0))) for r in d["rules"]]
        return cls(rules, {k: list(v) for k, v in d["lexicon"].items()}, int(d.get("max_depth", 4)), d.get("start", "S"))

    @classmethod
    def load(cls, path) -> "SynthGrammar":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_dict(self) -> dict:
        return {
            "rules": [{"lhs": r.lhs, "rhs": list(r.rhs), "weight": r.weight} for r in self.rules],
            "lexicon": self.lexicon,
            "max_depth": self.max_depth,
            "start": self.start,
        }


def default_grammar(max_depth: int | None = None) -> SynthGrammar:
    text = resources.files("phrasewin").joinpath("data/default_grammar.json").read_text(encoding="utf-8")
    g = SynthGrammar.from_dict(json.loads(text))
    if max_depth is not None:
        g.max_depth = max_depth
    return g


class _DeadEnd(Exception):
    pass


_EXPANSION_LIMIT = 60


def _derive(g: SynthGrammar, rng: np.random.Generator) -> str:
    by_lhs: dict[str, list[Rule]] = {}
    for r in g.rules:
        by_lhs.setdefault(r.lhs, []).append(r)
    nts = set(by_lhs)
    budget = [_EXPANSION_LIMIT]

    def expand(sym: str, depth: int) -> str:
        if sym not in nts:
            if sym in g.lexicon:
                toks = g.lexicon[sym]
                return toks[rng.integers(len(toks))]
            return sym
        budget[0] -= 1
        if budget[0] < 0:
            raise _DeadEnd
        kind = PHRASE_SYMBOLS.get(sym)
        inner = depth + 1 if kind is not None else depth
        options = by_lhs[sym]
        if inner >= g.max_depth:
            options = [r for r in options if not any(s in nts for s in r.rhs)]
            if not options:
                raise _DeadEnd
        w = np.array([r.weight for r in options])
        rule = options[rng.choice(len(options), p=w / w.sum())]
        body = "".join(expand(s, inner) for s in rule.rhs)
        if kind is None:
            return body
        opener, closer = DELIMITERS[kind]
        return f"{opener}{body}{closer}"

    return expand(g.start, 0)


def generate_synthetic(grammar: SynthGrammar, count: int, seed: int, max_retries: int = 200) -> Corpus:
    """Sample ``count`` valid sentences; each draw is retried until it parses,
    validates and fits the length cap."""
    if count < 1:
        raise ValueError("count must be at least 1")
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        for _attempt in range(max_retries):
            try:
                text = _derive(grammar, rng)
            except _DeadEnd:
                continue
            try:
                sent = parse_annotation(text)
            except AnnotationError:
                continue
            if sent.chars and not validate_tree(sent, max_length=MAX_SENTENCE_LENGTH):
                out.append(sent)
                break
        else:
            raise GrammarUnproductive(f"no valid sentence after {max_retries} attempts")
    return Corpus(out, {"generator": grammar.to_dict(), "seed": seed, "count": count})
