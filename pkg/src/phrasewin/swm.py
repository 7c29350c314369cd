"""Window model: proposal head, type head, losses, training and prediction.

Each anchor window is pooled from the encoder features and scored by the
proposal head (phrase vs background plus start/end offsets). Windows judged
to be phrases are moved by their rounded offsets, pooled again, and passed
to the type head, which picks one of the seven types and proposes a second
offset pair.
"""
from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from phrasewin.annotation import AnnotatedSentence, PhraseType, Span, flatten_phrases
from phrasewin.decoder import ScoredPhrase, decode
from phrasewin.encoder import (
    Encoder,
    EmptyInput,
    encode,
    encode_backward,
    encode_with_cache,
    init_encoder,
    pool_windows,
    pool_windows_backward,
)
from phrasewin.windowing import anchor_arrays, label_anchors, sample_training_anchors

log = logging.getLogger(__name__)

MODEL_FORMAT = "phrasewin-swm/1"
N_TYPES = len(PhraseType)
PROB_FLOOR = 1e-12


class DimensionMismatch(ValueError):
    pass


class NonFiniteLoss(FloatingPointError):
    def __init__(self, sentence_id: int, value: float):
        self.sentence_id = sentence_id
        super().__init__(f"non-finite loss {value} on sentence {sentence_id}")


# --------------------------------------------------------------------------
# losses


def classification_loss(p, gold_class: int) -> float:
    """Cross entropy of a probability vector against a one-hot gold class."""
    p = np.asarray(p, dtype=float)
    if not 0 <= gold_class < p.shape[-1]:
        raise DimensionMismatch(f"class {gold_class} outside 0..{p.shape[-1] - 1}")
    return float(-np.log(max(p[gold_class], PROB_FLOOR)))


def offset_loss(y_hat, y) -> float:
    """Root mean squared error between predicted and gold offset vectors."""
    y_hat = np.asarray(y_hat, dtype=float)
    y = np.asarray(y, dtype=float)
    if y_hat.shape != y.shape or y.size == 0:
        raise DimensionMismatch(f"shapes {y_hat.shape} and {y.shape}")
    return float(np.sqrt(np.mean((y - y_hat) ** 2)))


def _rmse_rows(pred, target):
    """Row-wise RMSE and its gradient w.r.t. ``pred`` (zero where exact)."""
    diff = pred - target
    m = diff.shape[1]
    r = np.sqrt((diff * diff).mean(axis=1))
    safe = np.where(r > 0, r, 1.0)
    grad = np.where(r[:, None] > 0, diff / (m * safe[:, None]), 0.0)
    return r, grad


def _softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _cross_entropy_rows(logits, gold):
    """Row-wise cross entropy with the probability floor, plus dLoss/dlogits."""
    p = _softmax(logits)
    rows = np.arange(len(gold))
    pg = p[rows, gold]
    loss = -np.log(np.maximum(pg, PROB_FLOOR))
    grad = p.copy()
    grad[rows, gold] -= 1.0
    grad[pg < PROB_FLOOR] = 0.0
    return loss, grad


def round_offsets(raw) -> np.ndarray:
    """Round half away from zero, then clamp to [-1, 1]."""
    raw = np.asarray(raw, dtype=float)
    return np.clip(np.sign(raw) * np.floor(np.abs(raw) + 0.5), -1, 1).astype(np.intp)


# --------------------------------------------------------------------------
# model


@dataclass
class SwmModel:
    encoder: Encoder
    heads: dict[str, np.ndarray] = field(repr=False)
    version: str = MODEL_FORMAT

    @property
    def window_dim(self) -> int:
        return 3 * self.encoder.out_dim

    def parameters(self) -> dict[str, np.ndarray]:
        return {**self.encoder.params, **self.heads}


def init_model(config: dict, seed: int, max_len: int = 50) -> SwmModel:
    """``config`` as for ``init_encoder``; head weights share the seed stream."""
    enc = init_encoder(config, seed, max_len=max_len)
    rng = np.random.default_rng([seed, 1])
    d = 3 * enc.out_dim
    s = 1.0 / math.sqrt(d)
    heads = {
        "Wp": rng.uniform(-s, s, size=(4, d)),
        "bp": np.zeros(4),
        "Wt": rng.uniform(-s, s, size=(N_TYPES + 2, d)),
        "bt": np.zeros(N_TYPES + 2),
    }
    return SwmModel(enc, heads)


@dataclass(frozen=True)
class ProposalOutput:
    p_phrase: float
    p_background: float
    dx_hat: float
    dy_hat: float


@dataclass(frozen=True)
class TypeOutput:
    probs: np.ndarray
    dx2_hat: float
    dy2_hat: float


def _check_window(window_vec, model):
    v = np.asarray(window_vec, dtype=float)
    if v.shape != (model.window_dim,):
        raise DimensionMismatch(f"window vector has shape {v.shape}, expected ({model.window_dim},)")
    return v


def proposal_forward(window_vec, model: SwmModel) -> ProposalOutput:
    v = _check_window(window_vec, model)
    out = model.heads["Wp"] @ v + model.heads["bp"]
    p = _softmax(out[:2])
    return ProposalOutput(float(p[0]), float(p[1]), float(out[2]), float(out[3]))


def type_forward(window_vec, model: SwmModel) -> TypeOutput:
    v = _check_window(window_vec, model)
    out = model.heads["Wt"] @ v + model.heads["bt"]
    return TypeOutput(_softmax(out[:N_TYPES]), float(out[N_TYPES]), float(out[N_TYPES + 1]))


def _shift(starts, ends, offsets, n):
    """Apply integer offsets to 0-based spans; returns new arrays and a validity mask."""
    s = starts + offsets[:, 0]
    e = ends + offsets[:, 1]
    ok = (s >= 0) & (s <= e) & (e < n)
    return s, e, ok


# --------------------------------------------------------------------------
# training


@dataclass
class TrainConfig:
    lr: float = 0.01
    epochs: int = 10
    neg_ratio: float = 2.0
    lambda_offset: float = 1.0
    threshold: float = 0.5
    seed: int = 0
    dims: dict = field(default_factory=lambda: {"E": 32, "H": 64})

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown training settings: {sorted(unknown)}")
        cfg = cls(**d)
        if cfg.lr <= 0 or cfg.neg_ratio <= 0 or cfg.epochs < 1:
            raise ValueError("lr, neg_ratio and epochs must be positive")
        return cfg

    @classmethod
    def load(cls, path) -> "TrainConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SentenceLoss:
    total: float
    objectness: float
    offset: float
    type: float
    refine: float


def sentence_loss(
    model: SwmModel,
    chars: str,
    labels: dict,
    sampled: Sequence[int],
    lambda_offset: float = 1.0,
    with_grads: bool = True,
):
    """Joint loss over the sampled anchors of one sentence.

    objectness cross entropy over all sampled anchors, plus for positives:
    ``lambda_offset`` x offset RMSE, type cross entropy at the offset-corrected
    window, and ``lambda_offset`` x RMSE of the second offset pair.
    Returns ``(SentenceLoss, grads)``; grads is None unless requested.
    """
    n = len(chars)
    W = model.heads
    F, cache = encode_with_cache(chars, model.encoder)
    all_s, all_e = anchor_arrays(n)
    idx = np.asarray(sampled, dtype=np.intp)
    s, e = all_s[idx], all_e[idx]
    lab = [labels[i] for i in sampled]
    positive = np.array([l.positive for l in lab], dtype=bool)

    V = pool_windows(F, s, e)
    out = V @ W["Wp"].T + W["bp"]
    obj_loss, d_obj = _cross_entropy_rows(out[:, :2], np.where(positive, 0, 1))
    d_out = np.zeros_like(out)
    d_out[:, :2] = d_obj

    pos = np.flatnonzero(positive)
    off_loss = type_loss = ref_loss = 0.0
    if len(pos):
        target = np.array([[lab[i].target_offset.dx, lab[i].target_offset.dy] for i in pos], float)
        r, g = _rmse_rows(out[pos, 2:], target)
        off_loss = r.sum()
        d_out[pos, 2:] = lambda_offset * g

        shift = round_offsets(out[pos, 2:])
        cs, ce, ok = _shift(s[pos], e[pos], shift, n)
        cs = np.where(ok, cs, s[pos])
        ce = np.where(ok, ce, e[pos])
        gold_s = np.array([lab[i].gold_span.start - 1 for i in pos])
        gold_e = np.array([lab[i].gold_span.end - 1 for i in pos])
        gold_t = np.array([int(lab[i].gold_type) for i in pos])
        T = pool_windows(F, cs, ce)
        tout = T @ W["Wt"].T + W["bt"]
        tl, d_t = _cross_entropy_rows(tout[:, :N_TYPES], gold_t)
        type_loss = tl.sum()
        target2 = np.clip(np.stack([gold_s - cs, gold_e - ce], axis=1), -1, 1).astype(float)
        r2, g2 = _rmse_rows(tout[:, N_TYPES:], target2)
        ref_loss = r2.sum()
        d_tout = np.hstack([d_t, lambda_offset * g2])

    total = obj_loss.sum() + lambda_offset * off_loss + type_loss + lambda_offset * ref_loss
    stats = SentenceLoss(float(total), float(obj_loss.sum()), float(off_loss), float(type_loss), float(ref_loss))
    if not with_grads:
        return stats, None

    grads = {"Wp": d_out.T @ V, "bp": d_out.sum(axis=0)}
    dF = pool_windows_backward(d_out @ W["Wp"], s, e, n)
    if len(pos):
        grads["Wt"] = d_tout.T @ T
        grads["bt"] = d_tout.sum(axis=0)
        dF += pool_windows_backward(d_tout @ W["Wt"], cs, ce, n)
    else:
        grads["Wt"] = np.zeros_like(W["Wt"])
        grads["bt"] = np.zeros_like(W["bt"])
    grads.update(encode_backward(dF, cache, model.encoder))
    return stats, grads


def sgd_step(model: SwmModel, grads: dict, lr: float) -> None:
    params = model.parameters()
    for name, g in grads.items():
        if name == "emb":
            ids, rows = g
            np.add.at(params["emb"], ids, -lr * rows)
        else:
            params[name] -= lr * g


@dataclass
class EpochStats:
    epoch: int
    sentences: int
    mean_total: float
    mean_objectness: float
    mean_offset: float
    mean_type: float
    mean_refine: float
    seconds: float


def train_epoch(
    corpus: Sequence[AnnotatedSentence],
    model: SwmModel,
    config: TrainConfig,
    rng: np.random.Generator,
    epoch: int = 0,
) -> EpochStats:
    """One pass of per-sentence SGD in an ``rng``-shuffled order."""
    if not corpus:
        raise ValueError("training corpus is empty")
    t0 = time.perf_counter()
    sums = np.zeros(5)
    order = rng.permutation(len(corpus))
    for sid in order:
        sent = corpus[sid]
        n = len(sent.chars)
        labels = label_anchors(flatten_phrases(sent), n)
        sampled = sample_training_anchors(labels, config.neg_ratio, rng)
        stats, grads = sentence_loss(model, sent.chars, labels, sampled, config.lambda_offset)
        if not math.isfinite(stats.total):
            raise NonFiniteLoss(int(sid), stats.total)
        sgd_step(model, grads, config.lr)
        sums += (stats.total, stats.objectness, stats.offset, stats.type, stats.refine)
    m = sums / len(corpus)
    return EpochStats(epoch, len(corpus), *map(float, m), time.perf_counter() - t0)


def build_vocab(corpus: Sequence[AnnotatedSentence]) -> list[str]:
    return sorted({ch for s in corpus for ch in s.chars})


def train(corpus, config: TrainConfig, dev=None, callback=None) -> SwmModel:
    """Initialise a model from ``config`` and run ``config.epochs`` epochs.

    ``callback(stats, model)`` is invoked after every epoch.
    """
    if not corpus:
        raise ValueError("training corpus is empty")
    model = init_model({**config.dims, "vocab": build_vocab(corpus)}, config.seed)
    rng = np.random.default_rng(config.seed)
    for ep in range(1, config.epochs + 1):
        stats = train_epoch(corpus, model, config, rng, epoch=ep)
        log.info("epoch %d mean loss %.4f (%.1fs)", ep, stats.mean_total, stats.seconds)
        if callback is not None:
            callback(stats, model)
    return model


# --------------------------------------------------------------------------
# inference


def predict_sentence(chars: str, model: SwmModel, threshold: float = 0.5) -> list[ScoredPhrase]:
    """Scored, typed proposals for one sentence, before forest decoding."""
    n = len(chars)
    if n == 0:
        raise EmptyInput("cannot predict on an empty sentence")
    W = model.heads
    F = encode(chars, model.encoder)
    s, e = anchor_arrays(n)
    out = pool_windows(F, s, e) @ W["Wp"].T + W["bp"]
    p_phrase = _softmax(out[:, :2])[:, 0]
    keep = np.flatnonzero(p_phrase >= threshold)
    if not len(keep):
        return []
    s1, e1, ok = _shift(s[keep], e[keep], round_offsets(out[keep, 2:]), n)
    keep, s1, e1 = keep[ok], s1[ok], e1[ok]
    if not len(keep):
        return []
    tout = pool_windows(F, s1, e1) @ W["Wt"].T + W["bt"]
    probs = _softmax(tout[:, :N_TYPES])
    kind = probs.argmax(axis=1)
    s2, e2, ok = _shift(s1, e1, round_offsets(tout[:, N_TYPES:]), n)
    score = p_phrase[keep] * probs.max(axis=1)
    return [
        ScoredPhrase(Span(int(a) + 1, int(b) + 1), PhraseType(int(k)), float(sc))
        for a, b, k, sc, good in zip(s2, e2, kind, score, ok)
        if good
    ]


def recognize(chars: str, model: SwmModel, threshold: float = 0.5) -> AnnotatedSentence:
    """Full pipeline: proposals, dedup, greedy forest, tree."""
    return decode(predict_sentence(chars, model, threshold), chars)


# --------------------------------------------------------------------------
# persistence


def model_to_dict(model: SwmModel) -> dict:
    enc = model.encoder
    vocab = [ch for ch, _ in sorted(enc.vocab.items(), key=lambda kv: kv[1])]
    return {
        "version": model.version,
        "config": {"E": enc.emb_dim, "H": enc.hidden, "max_len": enc.max_len, "encoder": enc.version},
        "vocab": vocab,
        "params": {
            name: {"shape": list(arr.shape), "data": arr.ravel().tolist()}
            for name, arr in model.parameters().items()
        },
    }


def model_from_dict(d: dict) -> SwmModel:
    if d.get("version") != MODEL_FORMAT:
        raise ValueError(f"unsupported model format {d.get('version')!r}")
    cfg = d["config"]
    arrays = {
        name: np.asarray(v["data"], dtype=np.float64).reshape(v["shape"]) for name, v in d["params"].items()
    }
    heads = {k: arrays.pop(k) for k in ("Wp", "bp", "Wt", "bt")}
    vocab = {ch: i + 1 for i, ch in enumerate(d["vocab"])}
    enc = Encoder(vocab, cfg["E"], cfg["H"], arrays, max_len=cfg["max_len"], version=cfg["encoder"])
    return SwmModel(enc, heads)


def save_model(model: SwmModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), ensure_ascii=False), encoding="utf-8")


def load_model(path) -> SwmModel:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
