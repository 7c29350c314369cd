"""Selects the LSTM recurrence implementation at import time.

The compiled extension is used when it was built; otherwise the numpy
fallback. Set ``PHRASEWIN_BACKEND=python`` to force the fallback.
"""
import os

from phrasewin import _lstm_py

BACKENDS = {"python": _lstm_py}

try:
    from phrasewin import _lstm_ext
except ImportError:  # extension not built
    _lstm_ext = None
else:
    BACKENDS["cython"] = _lstm_ext

_requested = os.environ.get("PHRASEWIN_BACKEND", "").strip().lower()
if _requested and _requested not in BACKENDS:
    raise ImportError(
        f"PHRASEWIN_BACKEND={_requested!r} is not available (have {sorted(BACKENDS)})"
    )
BACKEND = _requested or ("cython" if "cython" in BACKENDS else "python")

lstm_forward = BACKENDS[BACKEND].lstm_forward
lstm_backward = BACKENDS[BACKEND].lstm_backward
