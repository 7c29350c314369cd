import pytest

from phrasewin.annotation import parse_annotation
from phrasewin.baseline import TAGS, init_tagger, predict_tags, tag_sentence, tagger_loss, train_tagger
from phrasewin.encoder import dense_embedding_grad
from phrasewin.metrics import project_bio
from phrasewin.swm import TrainConfig

from conftest import numeric_grad, rel_error


def test_tag_inventory():
    assert len(TAGS) == 15 and TAGS[0] == "O"


def test_tagger_gradients():
    m = init_tagger({"E": 3, "H": 3, "vocab": list("在这次考试中")}, seed=1)
    s = parse_annotation("<在({这次}考试中)>")
    tags = project_bio(s)
    _, grads = tagger_loss(m, s.chars, tags)
    grads["emb"] = dense_embedding_grad(grads["emb"], m.encoder.params["emb"].shape)
    for name, arr in m.parameters().items():
        num = numeric_grad(lambda: tagger_loss(m, s.chars, tags, with_grads=False)[0], arr)
        assert rel_error(grads[name], num) < 1e-3, name


def test_tagger_fits_one_sentence():
    corpus = [parse_annotation("(我)[爱](祖国)")] * 3
    history = []
    m = train_tagger(
        corpus, TrainConfig(epochs=300, lr=0.05, dims={"E": 8, "H": 8}), callback=lambda st, _m: history.append(st.mean_total)
    )
    assert history[-1] < 0.1 * history[0]
    assert predict_tags("我爱祖国", m) == ["B-Noun", "B-Verb", "B-Noun", "I-Noun"]


def test_tagger_output_is_flat():
    corpus = [parse_annotation("<在({这次}考试中)>")] * 2
    m = train_tagger(corpus, TrainConfig(epochs=5, dims={"E": 4, "H": 4}))
    out = tag_sentence("在这次考试中", m)
    assert out.depth() <= 1


def test_tagger_empty_corpus():
    with pytest.raises(ValueError):
        train_tagger([], TrainConfig())
