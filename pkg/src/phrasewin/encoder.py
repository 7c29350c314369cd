"""Character encoder: embeddings followed by two bidirectional LSTM layers.

Forward and backward passes are written out by hand so that gradients are
exact and checkable; the per-step recurrence runs in ``phrasewin.kernels``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from phrasewin import kernels
from phrasewin.annotation import Span

ENCODER_VERSION = "bilstm2-v1"
OOV = 0
LAYERS = 2
DIRECTIONS = ("fw", "bw")


class InvalidConfig(ValueError):
    pass


class EmptyInput(ValueError):
    pass


@dataclass
class Encoder:
    """Parameters of the reference encoder.

    ``params`` maps names to float64 arrays: ``emb`` (V+1, E) with row 0 for
    unknown characters, and per layer/direction ``W`` (4H, in), ``U`` (4H, H),
    ``b`` (4H,), e.g. ``W1fw`` or ``U2bw``.
    """

    vocab: dict[str, int]
    emb_dim: int
    hidden: int
    params: dict[str, np.ndarray] = field(repr=False)
    max_len: int = 50
    version: str = ENCODER_VERSION

    @property
    def out_dim(self) -> int:
        return 2 * self.hidden

    def ids(self, chars: str) -> np.ndarray:
        return np.fromiter((self.vocab.get(ch, OOV) for ch in chars), dtype=np.intp, count=len(chars))


def init_encoder(config: dict, seed: int, max_len: int = 50) -> Encoder:
    """Fresh encoder. ``config`` needs ``E``, ``H`` and ``vocab`` (iterable of chars)."""
    try:
        E, H, vocab = int(config["E"]), int(config["H"]), config["vocab"]
    except KeyError as exc:
        raise InvalidConfig(f"missing encoder setting {exc}") from None
    if E < 1 or H < 1:
        raise InvalidConfig("E and H must be at least 1")
    chars = sorted(set(vocab))
    if not chars:
        raise InvalidConfig("vocabulary is empty")
    index = {ch: i + 1 for i, ch in enumerate(chars)}

    rng = np.random.default_rng(seed)

    def uniform(shape, fan_in):
        s = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-s, s, size=shape)

    # an embedding row is selected by a single one-hot input, so fan-in is 1
    params = {"emb": uniform((len(index) + 1, E), 1)}
    for layer in range(1, LAYERS + 1):
        d_in = E if layer == 1 else 2 * H
        for d in DIRECTIONS:
            params[f"W{layer}{d}"] = uniform((4 * H, d_in), d_in + H)
            params[f"U{layer}{d}"] = uniform((4 * H, H), d_in + H)
            b = np.zeros(4 * H)
            b[H : 2 * H] = 1.0  # forget gate starts open
            params[f"b{layer}{d}"] = b
    return Encoder(index, E, H, params, max_len=max_len)


def _run_direction(x, W, U, b, reverse):
    xproj = x @ W.T + b
    if reverse:
        xproj = xproj[::-1]
    h, c, gates = kernels.lstm_forward(np.ascontiguousarray(xproj), U)
    return h, c, gates


def encode_with_cache(chars: str, enc: Encoder):
    n = len(chars)
    if n == 0:
        raise EmptyInput("cannot encode an empty sentence")
    if n > enc.max_len:
        raise ValueError(f"sentence of {n} characters exceeds max_len={enc.max_len}")
    p = enc.params
    ids = enc.ids(chars)
    x = p["emb"][ids]
    cache = {"ids": ids, "inputs": [], "states": []}
    for layer in range(1, LAYERS + 1):
        cache["inputs"].append(x)
        outs = []
        layer_states = []
        for d in DIRECTIONS:
            rev = d == "bw"
            h, c, gates = _run_direction(x, p[f"W{layer}{d}"], p[f"U{layer}{d}"], p[f"b{layer}{d}"], rev)
            layer_states.append((h, c, gates))
            outs.append(h[::-1] if rev else h)
        cache["states"].append(layer_states)
        x = np.concatenate(outs, axis=1)
    return x, cache


def encode(chars: str, enc: Encoder) -> np.ndarray:
    """Features of shape (N, 2H), row i for character i+1."""
    return encode_with_cache(chars, enc)[0]


def encode_backward(dF: np.ndarray, cache, enc: Encoder) -> dict[str, np.ndarray]:
    """Gradients of every encoder parameter given dLoss/dFeatures.

    The embedding gradient is returned densely as ``emb_rows`` (ids, grads)
    pairs under ``"emb"`` so callers can update only touched rows.
    """
    p = enc.params
    H = enc.hidden
    grads: dict[str, np.ndarray] = {}
    dx = dF
    for layer in range(LAYERS, 0, -1):
        x = cache["inputs"][layer - 1]
        dx_in = np.zeros_like(x)
        for k, d in enumerate(DIRECTIONS):
            rev = d == "bw"
            h, c, gates = cache["states"][layer - 1][k]
            dh = dx[:, k * H : (k + 1) * H]
            if rev:
                dh = dh[::-1]
            U = p[f"U{layer}{d}"]
            dz = kernels.lstm_backward(np.ascontiguousarray(dh), gates, c, U)
            grads[f"U{layer}{d}"] = dz[1:].T @ h[:-1]
            if rev:
                dz = dz[::-1]
            grads[f"W{layer}{d}"] = dz.T @ x
            grads[f"b{layer}{d}"] = dz.sum(axis=0)
            dx_in += dz @ p[f"W{layer}{d}"]
        dx = dx_in
    grads["emb"] = (cache["ids"], dx)
    return grads


def dense_embedding_grad(grad, shape) -> np.ndarray:
    ids, rows = grad
    out = np.zeros(shape)
    np.add.at(out, ids, rows)
    return out


def pool_window(f: np.ndarray, span: Span) -> np.ndarray:
    """``[f[start]; f[end]; mean(f[start..end])]`` for a 1-based inclusive span."""
    n = f.shape[0]
    if not span.valid_for(n):
        raise IndexError(f"span {span} outside 1..{n}")
    s, e = span.start - 1, span.end - 1
    return np.concatenate([f[s], f[e], f[s : e + 1].mean(axis=0)])


def pool_windows(f: np.ndarray, starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
    """Vectorised ``pool_window`` over 0-based inclusive (start, end) arrays."""
    prefix = np.vstack([np.zeros((1, f.shape[1])), np.cumsum(f, axis=0)])
    lengths = (ends - starts + 1)[:, None]
    means = (prefix[ends + 1] - prefix[starts]) / lengths
    return np.hstack([f[starts], f[ends], means])


def pool_windows_backward(dW: np.ndarray, starts, ends, n: int) -> np.ndarray:
    D = dW.shape[1] // 3
    dF = np.zeros((n, D))
    np.add.at(dF, starts, dW[:, :D])
    np.add.at(dF, ends, dW[:, D : 2 * D])
    dmean = dW[:, 2 * D :] / (ends - starts + 1)[:, None]
    # range-add via difference array
    diff = np.zeros((n + 1, D))
    np.add.at(diff, starts, dmean)
    np.add.at(diff, ends + 1, -dmean)
    dF += np.cumsum(diff[:-1], axis=0)
    return dF
