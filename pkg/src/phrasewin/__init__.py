"""Nested phrase windows: notation codec, window model, decoder and metrics."""
from phrasewin.annotation import (
    AnnotatedSentence,
    PhraseNode,
    PhraseType,
    Span,
    flatten_phrases,
    parse_annotation,
    serialize_annotation,
    validate_tree,
)
from phrasewin.kernels import BACKEND

__version__ = "0.1.0"
