import numpy as np
import pytest

from phrasewin import swm
from phrasewin.annotation import (
    ATOMIC_TYPES,
    AnnotatedSentence,
    PhraseNode,
    PhraseType,
    Span,
    flatten_phrases,
    parse_annotation,
)
from phrasewin.corpus import default_grammar, generate_synthetic

HANZI = "我你他爱看说祖国老师学生书车球在被把这那一两个本中里吗吧呢但是因为所以"


def random_nodes(rng, lo, hi, depth, max_depth, parent=None):
    """Random disjoint, sorted phrase nodes inside [lo, hi]; none equals ``parent``."""
    nodes = []
    pos = lo
    while pos <= hi:
        if rng.random() < 0.35:
            pos += 1
            continue
        end = int(rng.integers(pos, hi + 1))
        span = Span(pos, end)
        if span == parent:
            pos += 1
            continue
        kind = PhraseType(int(rng.integers(7)))
        kids = ()
        if kind not in ATOMIC_TYPES and depth < max_depth and len(span) > 1:
            kids = tuple(random_nodes(rng, span.start, span.end, depth + 1, max_depth, span))
        nodes.append(PhraseNode(kind, span, kids))
        pos = end + 1
    return nodes


def random_sentence(rng, n=None, max_depth=3):
    n = int(rng.integers(1, 13)) if n is None else n
    chars = "".join(rng.choice(list(HANZI), size=n))
    return AnnotatedSentence(chars, tuple(random_nodes(rng, 1, n, 1, max_depth)))


def random_gold(rng, n):
    """Crossing-free typed spans (with nesting) for a sentence of length n."""
    return flatten_phrases(random_sentence(rng, n))


def numeric_grad(f, arr, h=1e-4):
    """Central differences of scalar ``f()`` w.r.t. every entry of ``arr`` (mutated in place)."""
    g = np.zeros_like(arr)
    for i in np.ndindex(arr.shape):
        old = arr[i]
        arr[i] = old + h
        fp = f()
        arr[i] = old - h
        fm = f()
        arr[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def rel_error(a, b):
    a, b = np.ravel(a), np.ravel(b)
    denom = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / denom)


@pytest.fixture(scope="session")
def toy_model():
    """Small model trained until it reproduces the first worked example."""
    corpus = generate_synthetic(default_grammar(), 40, seed=3).sentences
    corpus = corpus + [parse_annotation("(我)[爱](祖国)")] * 5
    cfg = swm.TrainConfig(epochs=60, dims={"E": 12, "H": 12}, seed=0)
    return swm.train(corpus, cfg)


# acceptance lines are echoed again at the end of the run so they survive output capture
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
