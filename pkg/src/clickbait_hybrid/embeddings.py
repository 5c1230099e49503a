"""Text-side representations.

Pretrained word and document vectors are looked up as constants; a trainable
character-level CNN embeds each word from its characters so out-of-vocabulary
tokens still get a learned representation. Titles become fixed-width (K rows)
matrices with an explicit mask; padding rows are exact zeros and receive no
gradient.
"""

from __future__ import annotations

import string
from dataclasses import dataclass

import numpy as np

from . import tensor as tc
from .tensor import Tensor

WORD_DIM = 300
DOC_DIM = 300
PAD_TOKEN = "<pad>"

# reserved character-table rows
PAD_CHAR_ID = 0
UNK_CHAR_ID = 1

_EDGE_PUNCT = string.punctuation


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, strip edge punctuation.

    A leading ``#`` or ``@`` survives so hashtags and handles stay intact;
    interior punctuation is kept. Tokens that strip to nothing are dropped.
    """
    tokens = []
    for raw in text.lower().split():
        prefix = raw[0] if raw[0] in "#@" else ""
        core = raw[len(prefix) :].lstrip(_EDGE_PUNCT).rstrip(_EDGE_PUNCT)
        token = prefix + core
        if core:
            tokens.append(token)
    return tokens


@dataclass
class EmbeddingTable:
    """Fixed-width float vectors keyed by token; read-only after construction."""

    dim: int
    entries: dict[str, np.ndarray]

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError(f"embedding dim must be positive, got {self.dim}")
        for token, vec in self.entries.items():
            if vec.shape != (self.dim,):
                raise ValueError(f"vector for {token!r} has shape {vec.shape}, expected ({self.dim},)")

    def __len__(self) -> int:
        return len(self.entries)


def lookup_word(table: EmbeddingTable, token: str) -> tuple[np.ndarray, bool]:
    """Return (vector, oov_flag). Absent tokens map to zeros with the flag set;
    the reserved padding token maps to zeros without it. Never mutates the table."""
    if table.dim != WORD_DIM:
        raise ValueError(f"word table must have dim {WORD_DIM}, got {table.dim}")
    if token == PAD_TOKEN:
        return np.zeros(WORD_DIM), False
    vec = table.entries.get(token)
    if vec is None:
        return np.zeros(WORD_DIM), True
    return vec, False


def lookup_doc(
    table: EmbeddingTable,
    doc_id: str,
    fallback_tokens: tuple[str, ...] | list[str] = (),
    word_table: EmbeddingTable | None = None,
) -> tuple[np.ndarray, bool]:
    """Document vector by id, with a mean-of-word-vectors fallback.

    When ``doc_id`` is absent the fallback is the arithmetic mean of the word
    vectors of ``fallback_tokens`` that exist in ``word_table`` (zeros when
    none do); the second element flags that the fallback was used.
    """
    if table.dim != DOC_DIM:
        raise ValueError(f"doc table must have dim {DOC_DIM}, got {table.dim}")
    vec = table.entries.get(doc_id)
    if vec is not None:
        return vec, False
    if word_table is not None:
        found = [word_table.entries[t] for t in fallback_tokens if t in word_table.entries]
        if found:
            return np.mean(found, axis=0), True
    return np.zeros(DOC_DIM), True


def title_doc_id(record_id: str) -> str:
    return f"{record_id}:title"


def description_doc_id(record_id: str) -> str:
    return f"{record_id}:description"


@dataclass
class CharCnnParams:
    """Character table plus a stack of width-``width`` conv layers, each
    followed by ReLU, then max-over-time pooling. Everything is trainable.

    ``char_index`` maps characters to table rows >= 2; rows 0 and 1 are the
    padding and unknown characters.
    """

    char_index: dict[str, int]
    table: Tensor
    convs: list[tuple[Tensor, Tensor]]  # (kernels (w, C_in, C_out), bias (C_out,))
    width: int = 3

    @property
    def out_dim(self) -> int:
        return self.convs[-1][0].shape[2]

    @property
    def min_length(self) -> int:
        # each valid conv shrinks the sequence by width - 1
        return 1 + len(self.convs) * (self.width - 1)

    def char_ids(self, token: str) -> list[int]:
        return [self.char_index.get(ch, UNK_CHAR_ID) for ch in token]


def embed_word_chars(params: CharCnnParams, token: str) -> Tensor:
    """Character-CNN embedding of one token, shape (out_dim,).

    Differentiable end to end; tokens shorter than the conv stack's minimum
    length are padded with the pad-character row.
    """
    if not token:
        raise ValueError("cannot embed an empty token")
    ids = params.char_ids(token)
    if len(ids) < params.min_length:
        ids = ids + [PAD_CHAR_ID] * (params.min_length - len(ids))
    x = tc.gather_rows(params.table, ids)
    for kernels, bias in params.convs:
        x = tc.relu(tc.conv1d(x, kernels, bias))
    return tc.maxpool_over_time(x)


@dataclass
class EmbeddedTitle:
    """Fixed-width title matrix plus bookkeeping.

    ``rows`` is (K, WORD_DIM + char out_dim); row t concatenates token t's
    pretrained word vector (constant) with its character-CNN embedding.
    Rows at and past ``n_tokens`` are exact zeros, ``mask`` is True on the
    real-token prefix.
    """

    rows: Tensor
    mask: np.ndarray
    n_tokens: int
    oov_count: int
    truncated: int


def embed_title(
    word_table: EmbeddingTable, char_params: CharCnnParams, tokens: list[str], cap: int
) -> EmbeddedTitle:
    """Embed a token list into exactly ``cap`` rows, truncating or zero-padding."""
    if cap < 1:
        raise ValueError(f"title cap must be positive, got {cap}")
    kept = tokens[:cap]
    width = WORD_DIM + char_params.out_dim
    rows = []
    oov_count = 0
    for token in kept:
        word_vec, oov = lookup_word(word_table, token)
        oov_count += oov
        char_vec = embed_word_chars(char_params, token)
        rows.append(tc.reshape(tc.concat([Tensor(word_vec), char_vec], axis=0), (1, width)))
    if len(kept) < cap:
        rows.append(tc.zeros((cap - len(kept), width)))
    mask = np.arange(cap) < len(kept)
    return EmbeddedTitle(
        rows=tc.concat(rows, axis=0),
        mask=mask,
        n_tokens=len(kept),
        oov_count=oov_count,
        truncated=len(tokens) - len(kept),
    )
