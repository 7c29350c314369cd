"""Flat BIO tagger: the same encoder with a per-character softmax.

This is the end-to-end comparison point. It is trained on the outermost
BIO projection of the gold forest, so it can never produce a nested phrase.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from phrasewin.annotation import AnnotatedSentence, PhraseNode, PhraseType
from phrasewin.encoder import Encoder, encode, encode_backward, encode_with_cache, init_encoder
from phrasewin.metrics import OUTSIDE, bio_spans, project_bio
from phrasewin.swm import (
    EpochStats,
    NonFiniteLoss,
    TrainConfig,
    _cross_entropy_rows,
    _softmax,
    build_vocab,
    sgd_step,
)

TAGS = [OUTSIDE] + [f"{p}-{t.label}" for t in PhraseType for p in "BI"]
TAG_INDEX = {t: i for i, t in enumerate(TAGS)}


@dataclass
class BioTagger:
    encoder: Encoder
    heads: dict[str, np.ndarray] = field(repr=False)
    level: str = "outermost"

    def parameters(self):
        return {**self.encoder.params, **self.heads}


def init_tagger(config: dict, seed: int, level: str = "outermost") -> BioTagger:
    enc = init_encoder(config, seed)
    rng = np.random.default_rng([seed, 2])
    d = enc.out_dim
    s = 1.0 / math.sqrt(d)
    heads = {"Wc": rng.uniform(-s, s, size=(len(TAGS), d)), "bc": np.zeros(len(TAGS))}
    return BioTagger(enc, heads, level)


def tagger_loss(model: BioTagger, chars: str, tags: Sequence[str], with_grads: bool = True):
    F, cache = encode_with_cache(chars, model.encoder)
    logits = F @ model.heads["Wc"].T + model.heads["bc"]
    gold = np.array([TAG_INDEX[t] for t in tags])
    loss, d = _cross_entropy_rows(logits, gold)
    total = float(loss.sum())
    if not with_grads:
        return total, None
    grads = {"Wc": d.T @ F, "bc": d.sum(axis=0)}
    grads.update(encode_backward(d @ model.heads["Wc"], cache, model.encoder))
    return total, grads


def train_tagger(corpus: Sequence[AnnotatedSentence], config: TrainConfig, level: str = "outermost", callback=None) -> BioTagger:
    if not corpus:
        raise ValueError("training corpus is empty")
    model = init_tagger({**config.dims, "vocab": build_vocab(corpus)}, config.seed, level)
    rng = np.random.default_rng(config.seed)
    targets = [project_bio(s, level) for s in corpus]
    for ep in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        total = 0.0
        for sid in rng.permutation(len(corpus)):
            loss, grads = tagger_loss(model, corpus[sid].chars, targets[sid])
            if not math.isfinite(loss):
                raise NonFiniteLoss(int(sid), loss)
            sgd_step(model, grads, config.lr)
            total += loss
        if callback is not None:
            m = total / len(corpus)
            callback(EpochStats(ep, len(corpus), m, m, 0.0, 0.0, 0.0, time.perf_counter() - t0), model)
    return model


def predict_tags(chars: str, model: BioTagger) -> list[str]:
    F = encode(chars, model.encoder)
    probs = _softmax(F @ model.heads["Wc"].T + model.heads["bc"])
    return [TAGS[i] for i in probs.argmax(axis=1)]


def tag_sentence(chars: str, model: BioTagger) -> AnnotatedSentence:
    """Decoded tags as a flat forest (all phrases are roots)."""
    roots = [PhraseNode(kind, span) for span, kind in bio_spans(predict_tags(chars, model))]
    return AnnotatedSentence(chars, tuple(roots))
