"""Compare the compiled and numpy LSTM recurrence kernels.

    python3 benchmarks/bench_lstm.py [--hidden 64] [--lengths 10,25,50] [--repeat 200]

Reports the median wall time of one forward plus backward pass per backend,
and the time of one full training step on a sentence of each length.
"""
from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from phrasewin import _lstm_py, kernels, swm
from phrasewin.annotation import PhraseType, Span
from phrasewin.windowing import label_anchors, sample_training_anchors


def _median_ms(fn, repeat: int) -> float:
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return 1000 * statistics.median(times)


def kernel_pass(backend, T: int, H: int):
    rng = np.random.default_rng(0)
    x = rng.normal(size=(T, 4 * H))
    U = rng.normal(size=(4 * H, H)) * 0.2
    dh = rng.normal(size=(T, H))

    def run():
        h, c, gates = backend.lstm_forward(x, U)
        backend.lstm_backward(dh, gates, c, U)

    return run


def train_step(T: int, H: int):
    vocab = [chr(0x4E00 + i) for i in range(64)]
    model = swm.init_model({"E": 32, "H": H, "vocab": vocab}, seed=0)
    chars = "".join(vocab[i % 64] for i in range(T))
    # a flat sentence of two-character noun phrases
    gold = [(Span(i, i + 1), PhraseType.NOUN) for i in range(1, T, 2)]
    labels = label_anchors(gold, T)
    sampled = sample_training_anchors(labels, 2.0, 0)
    return lambda: swm.sentence_loss(model, chars, labels, sampled)


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--hidden", type=int, default=64)
    ap.add_argument("--lengths", default="10,25,50")
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args(argv)
    lengths = [int(x) for x in args.lengths.split(",")]

    backends = {"python": _lstm_py}
    if "cython" in kernels.BACKENDS:
        backends["cython"] = kernels.BACKENDS["cython"]
    else:
        print("compiled extension not built; only the numpy kernel is timed")

    print(f"recurrence forward+backward, H={args.hidden} (median ms)")
    print(f"{'T':>4} " + " ".join(f"{name:>9}" for name in backends) + ("  speedup" if len(backends) > 1 else ""))
    for T in lengths:
        ms = {name: _median_ms(kernel_pass(b, T, args.hidden), args.repeat) for name, b in backends.items()}
        row = f"{T:>4} " + " ".join(f"{v:9.3f}" for v in ms.values())
        if len(ms) > 1:
            row += f"  {ms['python'] / ms['cython']:7.2f}x"
        print(row)

    print(f"\nfull sentence loss + gradients, E=32 H={args.hidden}, active backend (median ms)")
    for name, b in backends.items():
        kernels.lstm_forward, kernels.lstm_backward = b.lstm_forward, b.lstm_backward
        cells = " ".join(f"T={T}: {_median_ms(train_step(T, args.hidden), max(10, args.repeat // 10)):7.2f}" for T in lengths)
        print(f"{name:>7}  {cells}")
    active = kernels.BACKENDS[kernels.BACKEND]
    kernels.lstm_forward, kernels.lstm_backward = active.lstm_forward, active.lstm_backward


if __name__ == "__main__":
    main()
