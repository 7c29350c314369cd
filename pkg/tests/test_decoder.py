import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phrasewin.annotation import PhraseType, Span, flatten_phrases, serialize_annotation, validate_tree
from phrasewin.decoder import (
    DecodeWarning,
    IncompatibleSet,
    ScoredPhrase,
    TooLarge,
    brute_force_select,
    build_forest,
    compatible,
    decode,
    dedup_proposals,
    select_forest_greedy,
)

from conftest import random_gold

N, V, Q, P, C = PhraseType.NOUN, PhraseType.VERB, PhraseType.QUANTITY, PhraseType.PREPOSITION, PhraseType.CONJUNCTION


def sp(a, b, kind=N, score=0.5):
    return ScoredPhrase(Span(a, b), kind, score)


def spans(props):
    return {p.span for p in props}


def random_props(rng, n, k):
    out = []
    for _ in range(k):
        a = int(rng.integers(1, n + 1))
        b = int(rng.integers(a, n + 1))
        out.append(sp(a, b, PhraseType(int(rng.integers(7))), float(rng.random())))
    return out


def test_scored_phrase_validation():
    with pytest.raises(ValueError):
        sp(2, 1)
    with pytest.raises(ValueError):
        sp(1, 1, score=float("nan"))


def test_dedup_examples():
    assert dedup_proposals([sp(1, 2, N, 0.9), sp(1, 2, V, 0.7)]) == [sp(1, 2, N, 0.9)]
    assert dedup_proposals([sp(1, 2, V, 0.8), sp(1, 2, N, 0.8)]) == [sp(1, 2, N, 0.8)]
    disjoint = [sp(1, 1, N, 0.9), sp(2, 3, V, 0.4)]
    assert dedup_proposals(disjoint) == disjoint


def test_greedy_examples():
    assert spans(select_forest_greedy([sp(1, 2, score=0.9), sp(2, 3, score=0.8)])) == {Span(1, 2)}
    assert spans(select_forest_greedy([sp(1, 4, score=0.9), sp(2, 3, score=0.8)])) == {Span(1, 4), Span(2, 3)}
    assert spans(select_forest_greedy([sp(1, 2, score=0.9), sp(3, 4, score=0.8)])) == {Span(1, 2), Span(3, 4)}


def test_greedy_tie_prefers_longer_span():
    got = select_forest_greedy([sp(2, 3, score=0.5), sp(1, 2, score=0.5), sp(1, 3, score=0.5)])
    # (1,3) first; then (1,2) by start order, which shuts out the crossing (2,3)
    assert [p.span for p in got] == [Span(1, 3), Span(1, 2)]


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_greedy_crossing_free_and_maximal(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 11))
    props = dedup_proposals(random_props(rng, n, int(rng.integers(0, 15))))
    chosen = select_forest_greedy(props)
    for a, b in itertools.combinations(chosen, 2):
        assert compatible(a.span, b.span)
    for p in props:
        if p not in chosen:
            assert any(not compatible(p.span, q.span) for q in chosen)


def test_brute_force_examples():
    assert brute_force_select([sp(1, 2, score=0.3)]) == [sp(1, 2, score=0.3)]
    assert brute_force_select([sp(1, 2, score=0.6), sp(2, 3, score=0.5)]) == [sp(1, 2, score=0.6)]
    assert brute_force_select([]) == []
    with pytest.raises(TooLarge):
        brute_force_select([sp(1, 1, score=0.1)] * 21)


def test_brute_force_beats_greedy_when_it_should():
    # one strong crossing span versus two weaker compatible ones
    props = [sp(2, 3, score=0.9), sp(1, 2, score=0.6), sp(3, 4, score=0.6)]
    assert spans(brute_force_select(props)) == {Span(1, 2), Span(3, 4)}
    assert spans(select_forest_greedy(props)) == {Span(2, 3)}


def _exhaustive_best(props):
    """Independent oracle: score every subset of indices directly."""
    best = -1.0
    for r in range(len(props) + 1):
        for idx in itertools.combinations(range(len(props)), r):
            if all(compatible(props[i].span, props[j].span) for i, j in itertools.combinations(idx, 2)):
                s = sum(props[i].score for i in idx)
                best = max(best, s)
    return best


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_brute_force_is_optimal(seed):
    rng = np.random.default_rng(seed)
    props = dedup_proposals(random_props(rng, 6, int(rng.integers(0, 9))))
    got = sum(p.score for p in brute_force_select(props))
    assert got == pytest.approx(_exhaustive_best(props))


def test_nested_chains_greedy_equals_brute_force():
    for n in range(1, 6):
        all_spans = [Span(a, b) for a in range(1, n + 1) for b in range(a, n + 1)]
        # every chain of strictly nested spans
        for r in range(1, n + 1):
            for chain in itertools.combinations(all_spans, r):
                if not all(y.contains(x) or x.contains(y) for x, y in itertools.combinations(chain, 2)):
                    continue
                rng = np.random.default_rng(len(chain) * 31 + n)
                props = [ScoredPhrase(s, N, float(rng.random())) for s in chain]
                assert spans(select_forest_greedy(props)) == spans(brute_force_select(props))


def test_greedy_near_optimal_on_random_instances():
    rng = np.random.default_rng(0)
    greedy_total = best_total = 0.0
    for _ in range(500):
        n = int(rng.integers(1, 9))
        props = dedup_proposals(random_props(rng, n, int(rng.integers(1, 13))))
        greedy_total += sum(p.score for p in select_forest_greedy(props))
        best_total += sum(p.score for p in brute_force_select(props))
    assert greedy_total >= 0.95 * best_total


# --------------------------------------------------------------------------
# forest construction


def test_build_worked_example():
    s = build_forest([sp(1, 1, N), sp(2, 2, V), sp(3, 4, N)], "我爱祖国")
    assert serialize_annotation(s) == "(我)[爱](祖国)"


def test_build_nested_preposition():
    s = build_forest([sp(2, 3, Q), sp(1, 6, P), sp(2, 6, N)], "在这次考试中")
    assert serialize_annotation(s) == "<在({这次}考试中)>"


def test_build_empty():
    s = build_forest([], "我爱祖国")
    assert s.roots == () and serialize_annotation(s) == "我爱祖国"


def test_build_rejects_crossing_and_duplicates():
    with pytest.raises(IncompatibleSet):
        build_forest([sp(1, 2), sp(2, 3)], "我爱祖国")
    with pytest.raises(IncompatibleSet):
        build_forest([sp(1, 2, N), sp(1, 2, V)], "我爱祖国")
    with pytest.raises(IncompatibleSet):
        build_forest([sp(1, 5)], "我爱祖国")


def test_build_repairs_atomic_nesting():
    warnings = []
    s = build_forest([sp(1, 2, C), sp(1, 1, N)], "但是", warnings)
    assert serialize_annotation(s) == "#但是#"
    assert len(warnings) == 1 and isinstance(warnings[0], DecodeWarning)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_valid_forest_is_fixed_point(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 12))
    gold = random_gold(rng, n)
    props = [ScoredPhrase(s, k, float(rng.random())) for s, k in gold]
    chars = "字" * n
    out = decode(props, chars)
    assert set(flatten_phrases(out)) == set(gold)
    assert decode(props, chars) == out


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_decoded_forest_is_valid(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 12))
    out = decode(random_props(rng, n, int(rng.integers(0, 20))), "字" * n)
    assert validate_tree(out) == []
