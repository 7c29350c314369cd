"""Phrase-level exact-match scoring and BIO projection of nested forests.

A predicted phrase counts only if both its span and its type match a gold
phrase; a phrase with one wrong boundary is simply wrong.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

from phrasewin.annotation import AnnotatedSentence, PhraseType, Span, flatten_phrases

OUTSIDE = "O"
LEVELS = ("outermost", "innermost")


class LengthMismatch(ValueError):
    pass


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int

    @property
    def no_phrases(self) -> bool:
        """True when neither side had any phrase (scores are then reported as 0)."""
        return self.tp + self.fp + self.fn == 0

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int) -> "PRF":
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        f = 2 * p * r / (p + r) if p + r else 0.0
        return cls(p, r, f, tp, fp, fn)

    def to_dict(self) -> dict:
        return {**asdict(self), "no_phrases": self.no_phrases}


Typed = tuple[Span, PhraseType]


def _match_counts(pred: Iterable[Typed], gold: Iterable[Typed]) -> tuple[int, int, int]:
    p, g = Counter(pred), Counter(gold)
    tp = sum((p & g).values())
    return tp, sum(p.values()) - tp, sum(g.values()) - tp


def phrase_prf(pred: Iterable[Typed], gold: Iterable[Typed]) -> PRF:
    """Exact span-and-type matching, each gold phrase used at most once."""
    return PRF.from_counts(*_match_counts(pred, gold))


def per_type_prf(pred: Iterable[Typed], gold: Iterable[Typed]) -> dict[str, PRF]:
    pred, gold = list(pred), list(gold)
    out = {}
    for t in PhraseType:
        out[t.label] = phrase_prf([x for x in pred if x[1] == t], [x for x in gold if x[1] == t])
    return out


def project_bio(s: AnnotatedSentence, level: str = "outermost") -> list[str]:
    """Reduce a nested forest to one BIO tag per character.

    ``outermost`` tags the root phrases. ``innermost`` tags each character
    with the deepest phrase covering it; a phrase that resumes after one of
    its children starts a new ``B-`` run so the output stays well formed.
    """
    if level not in LEVELS:
        raise ValueError(f"level must be one of {LEVELS}")
    n = len(s.chars)
    owner: list[tuple[Span, PhraseType] | None] = [None] * n
    if level == "outermost":
        for node in s.roots:
            for i in range(node.span.start - 1, node.span.end):
                owner[i] = (node.span, node.kind)
    else:
        # pre-order walk: deeper nodes come later and overwrite
        for node, _ in s.walk():
            for i in range(node.span.start - 1, node.span.end):
                owner[i] = (node.span, node.kind)
    tags = []
    for i, o in enumerate(owner):
        if o is None:
            tags.append(OUTSIDE)
        elif i > 0 and owner[i - 1] == o:
            tags.append(f"I-{o[1].label}")
        else:
            tags.append(f"B-{o[1].label}")
    return tags


def bio_spans(tags: Sequence[str]) -> list[Typed]:
    """Maximal B-I runs as typed spans; an I- that cannot continue starts a new run."""
    spans: list[Typed] = []
    start = kind = None
    for i, tag in enumerate(list(tags) + [OUTSIDE], start=1):
        prefix, _, label = tag.partition("-")
        cont = prefix == "I" and kind is not None and label == kind.label
        if start is not None and not cont:
            spans.append((Span(start, i - 1), kind))
            start = kind = None
        if prefix in ("B", "I") and not cont:
            start, kind = i, PhraseType.from_label(label)
        elif prefix not in ("B", "I", "O"):
            raise ValueError(f"bad tag {tag!r}")
    return spans


def bio_phrase_f1(pred_tags: Sequence[str], gold_tags: Sequence[str]) -> PRF:
    if len(pred_tags) != len(gold_tags):
        raise LengthMismatch(f"{len(pred_tags)} predicted tags vs {len(gold_tags)} gold tags")
    return phrase_prf(bio_spans(pred_tags), bio_spans(gold_tags))


def _typed_set(x) -> Counter:
    if isinstance(x, AnnotatedSentence):
        x = flatten_phrases(x)
    return Counter(x)


def exact_sentence_accuracy(pred_forests: Sequence, gold_forests: Sequence) -> float:
    """Share of sentences whose whole typed-span set equals gold."""
    if len(pred_forests) != len(gold_forests):
        raise LengthMismatch(f"{len(pred_forests)} predictions vs {len(gold_forests)} gold sentences")
    if not gold_forests:
        return 0.0
    hits = sum(_typed_set(p) == _typed_set(g) for p, g in zip(pred_forests, gold_forests))
    return hits / len(gold_forests)


def phrase_micro_accuracy(prf: PRF) -> float:
    """Alternative accuracy: matched phrases over the union of both sides."""
    total = prf.tp + prf.fp + prf.fn
    return prf.tp / total if total else 0.0


def roots_of(s: AnnotatedSentence) -> list[Typed]:
    return [(n.span, n.kind) for n in s.roots]


def nested_of(s: AnnotatedSentence) -> list[Typed]:
    return [(n.span, n.kind) for n, depth in s.walk() if depth > 0]


def evaluate(
    pred: Sequence[AnnotatedSentence],
    gold: Sequence[AnnotatedSentence],
    level: str = "outermost",
    phrase_accuracy: bool = True,
) -> dict:
    """Metric report over parallel predicted and gold sentences."""
    if len(pred) != len(gold):
        raise LengthMismatch(f"{len(pred)} predictions vs {len(gold)} gold sentences")
    # the sentence index keeps phrases of different sentences apart
    all_pred = [x for k, s in enumerate(pred) for x in _with_id(flatten_phrases(s), k)]
    all_gold = [x for k, s in enumerate(gold) for x in _with_id(flatten_phrases(s), k)]
    micro = PRF.from_counts(*_match_counts(all_pred, all_gold))

    outer = [0, 0, 0]
    nested = [0, 0, 0]
    bio = [0, 0, 0]
    for k, (p, g) in enumerate(zip(pred, gold)):
        for acc, fp, fg in (
            (outer, roots_of(p), roots_of(g)),
            (nested, nested_of(p), nested_of(g)),
        ):
            for j, v in enumerate(_match_counts(_with_id(fp, k), _with_id(fg, k))):
                acc[j] += v
        r = bio_phrase_f1(project_bio(p, level), project_bio(g, level))
        bio[0] += r.tp
        bio[1] += r.fp
        bio[2] += r.fn

    per_type = {t: prf.to_dict() for t, prf in per_type_prf(all_pred, all_gold).items()}
    report = {
        "micro": micro.to_dict(),
        "per_type": per_type,
        "outermost": PRF.from_counts(*outer).to_dict(),
        "nested": PRF.from_counts(*nested).to_dict(),
        "bio": {"level": level, **PRF.from_counts(*bio).to_dict()},
        "sentence_accuracy": exact_sentence_accuracy(pred, gold),
        "counts": {
            "sentences": len(gold),
            "gold_phrases": len(all_gold),
            "pred_phrases": len(all_pred),
        },
    }
    if phrase_accuracy:
        report["phrase_accuracy"] = phrase_micro_accuracy(micro)
    return report


def _with_id(items, k):
    return [(span, kind, k) for span, kind in items]
