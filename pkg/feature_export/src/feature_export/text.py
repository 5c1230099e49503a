"""Tokenization matching the corpus conventions used downstream.

Lowercase, split on whitespace, strip punctuation from token edges, keep a
leading '#' or '@', and drop tokens whose core is empty.
"""

from __future__ import annotations

import string

_EDGE = string.punctuation


def tokenize(text: str) -> list[str]:
    tokens = []
    for raw in text.lower().split():
        prefix = raw[0] if raw[0] in "#@" else ""
        core = raw[len(prefix):].strip(_EDGE)
        if core:
            tokens.append(prefix + core)
    return tokens
