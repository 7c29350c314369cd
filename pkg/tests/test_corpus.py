import unicodedata
from collections import Counter
from pathlib import Path

import pytest

from phrasewin.annotation import PhraseType, parse_annotation, serialize_annotation, validate_tree
from phrasewin.corpus import (
    Corpus,
    EmptyCorpus,
    GrammarUnproductive,
    InvalidRatios,
    SynthGrammar,
    default_grammar,
    generate_synthetic,
    load_corpus,
    save_corpus,
    split_corpus,
)

FIXTURE = Path(__file__).parent / "data" / "notation_fixture.txt"


def write(tmp_path, text, name="c.txt"):
    p = tmp_path / name
    p.write_bytes(text.encode("utf-8"))
    return p


def test_load_single_sentence(tmp_path):
    corpus, diags = load_corpus(write(tmp_path, "(我)[爱](祖国)\n"))
    assert len(corpus) == 1 and diags == []
    assert serialize_annotation(corpus[0]) == "(我)[爱](祖国)"


def test_load_reports_bad_lines(tmp_path):
    text = "(我)[爱](祖国)\n" + "我" * 51 + "\n(我[爱)\n\n(他)\n"
    corpus, diags = load_corpus(write(tmp_path, text))
    assert len(corpus) == 2
    assert [(d.line, d.rule) for d in diags] == [(2, "MaxLength"), (3, "IllegalNesting")]
    _, diags = load_corpus(write(tmp_path, "(我)\n(我\n", "u.txt"))
    assert diags[0].rule == "UnbalancedDelimiter" and "offset 0" in diags[0].message


def test_load_fifty_chars_is_fine(tmp_path):
    corpus, diags = load_corpus(write(tmp_path, "我" * 50 + "\n"))
    assert len(corpus) == 1 and not diags


def test_load_empty_and_missing(tmp_path):
    with pytest.raises(EmptyCorpus):
        load_corpus(write(tmp_path, "(我\n\n"))
    with pytest.raises(OSError):
        load_corpus(tmp_path / "absent.txt")


def test_save_load_round_trip(tmp_path):
    corpus, _ = load_corpus(FIXTURE)
    out = tmp_path / "out.txt"
    save_corpus(corpus, out)
    again, diags = load_corpus(out)
    assert not diags and again.sentences == corpus.sentences


def test_save_is_byte_exact_nfc(tmp_path):
    line = "(𠀀é)[爱](祖国)"
    assert unicodedata.is_normalized("NFC", line)
    corpus, _ = load_corpus(write(tmp_path, line + "\n"))
    out = tmp_path / "o.txt"
    save_corpus(corpus, out)
    assert out.read_bytes() == (line + "\n").encode("utf-8")


def test_save_empty_rejected(tmp_path):
    with pytest.raises(EmptyCorpus):
        save_corpus(Corpus([]), tmp_path / "x.txt")


def test_split_sizes_and_determinism():
    sents = [parse_annotation(f"(我{'爱' * i})") for i in range(10)]
    corpus = Corpus(sents)
    tr, dv, te = split_corpus(corpus, (0.8, 0.1, 0.1), seed=3)
    assert (len(tr), len(dv), len(te)) == (8, 1, 1)
    assert Counter(map(serialize_annotation, tr.sentences + dv.sentences + te.sentences)) == Counter(
        map(serialize_annotation, sents)
    )
    again = split_corpus(corpus, (0.8, 0.1, 0.1), seed=3)
    assert [c.sentences for c in again] == [tr.sentences, dv.sentences, te.sentences]


@pytest.mark.parametrize("ratios", [(0.5, 0.5, 0.5), (0.9, 0.1, 0.0), (1.0, 0.0), (0.8, 0.3, -0.1)])
def test_split_rejects_bad_ratios(ratios):
    with pytest.raises(InvalidRatios):
        split_corpus(Corpus([parse_annotation("(我)")]), ratios, 0)


def test_synthetic_default_grammar_properties():
    corpus = generate_synthetic(default_grammar(), 100, seed=7)
    assert len(corpus) == 100
    kinds = set()
    deep = 0
    for s in corpus:
        assert validate_tree(s, max_length=50) == []
        kinds |= {n.kind for n, _ in s.walk()}
        deep += s.depth() >= 2
    assert len(kinds) >= 6
    assert deep >= 20


def test_synthetic_has_prep_noun_quantity_nesting():
    corpus = generate_synthetic(default_grammar(), 200, seed=7)

    def has_shape(node):
        if node.kind is PhraseType.PREPOSITION:
            for np_ in node.children:
                if np_.kind is PhraseType.NOUN and any(q.kind is PhraseType.QUANTITY for q in np_.children):
                    return True
        return any(has_shape(c) for c in node.children)

    assert any(has_shape(r) for s in corpus for r in s.roots)


def test_synthetic_depth_cap_one_is_flat():
    corpus = generate_synthetic(default_grammar(max_depth=1), 1, seed=0)
    assert corpus[0].depth() <= 1 and all(not r.children for r in corpus[0].roots)


def test_synthetic_deterministic():
    a = generate_synthetic(default_grammar(), 30, seed=5)
    b = generate_synthetic(default_grammar(), 30, seed=5)
    assert a.sentences == b.sentences


def test_unproductive_grammar():
    g = SynthGrammar.from_dict(
        {"rules": [{"lhs": "S", "rhs": ["NP"] * 60, "weight": 1}, {"lhs": "NP", "rhs": ["n"], "weight": 1}],
         "lexicon": {"n": ["书"]}, "max_depth": 3}
    )
    with pytest.raises(GrammarUnproductive):
        generate_synthetic(g, 1, seed=0, max_retries=5)


def test_grammar_validation():
    with pytest.raises(ValueError):
        SynthGrammar.from_dict({"rules": [{"lhs": "S", "rhs": ["n"], "weight": 0}], "lexicon": {"n": ["书"]}, "max_depth": 2})
    g = default_grammar()
    assert SynthGrammar.from_dict(g.to_dict()).to_dict() == g.to_dict()


def test_fixture_coverage():
    corpus, diags = load_corpus(FIXTURE)
    assert not diags and len(corpus) >= 100
    kinds = {n.kind for s in corpus for n, _ in s.walk()}
    assert kinds == set(PhraseType)
    assert max(s.depth() for s in corpus) >= 3
    text = FIXTURE.read_text(encoding="utf-8")
    assert "^" in text and "\\" in text
