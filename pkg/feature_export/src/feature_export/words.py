"""Export pretrained word vectors into an EMB1 table restricted to a vocabulary.

The source is the word2vec text interchange format: an optional
``<count> <dim>`` header line followed by ``<token> <v1> ... <vdim>`` lines.
Gzip-compressed sources (``.gz``) are read transparently.
"""

from __future__ import annotations

import gzip
import warnings
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .formats import EMB1_MAGIC, write_embeddings
from .manifest import WORD_DIM, ExportManifest


def _open_text(path):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, "rt", encoding="utf-8")
    return open(path, "r", encoding="utf-8")


def iter_word2vec_text(path) -> Iterator[tuple[str, np.ndarray]]:
    """Yield (token, float64 vector) pairs from a word2vec text file."""
    with _open_text(path) as handle:
        first = handle.readline()
        if not first:
            return
        parts = first.split()
        # a two-integer first line is the "count dim" header; otherwise it is data
        if len(parts) == 2 and all(p.lstrip("-").isdigit() for p in parts):
            pass
        else:
            yield _parse_line(parts, 1, path)
        for lineno, line in enumerate(handle, start=2):
            parts = line.split()
            if not parts:
                continue
            yield _parse_line(parts, lineno, path)


def _parse_line(parts: list[str], lineno: int, path) -> tuple[str, np.ndarray]:
    if len(parts) < 2:
        raise ValueError(f"{path}: line {lineno}: expected a token and its vector")
    token = parts[0]
    try:
        vector = np.array([float(p) for p in parts[1:]], dtype=np.float64)
    except ValueError as exc:
        raise ValueError(f"{path}: line {lineno}: non-numeric vector component") from exc
    return token, vector


def export_word_vectors(source, vocab: Iterable[str], out_path) -> ExportManifest:
    """Write an EMB1 file with the source vectors for the given vocabulary.

    Tokens absent from the source are omitted (the model falls back to
    character embeddings for them). Source vectors must be 300-dimensional.
    """
    wanted = set(vocab)
    if not wanted:
        raise ValueError("vocabulary is empty")
    selected: dict[str, np.ndarray] = {}
    for token, vector in iter_word2vec_text(source):
        if token not in wanted or token in selected:
            continue
        if vector.shape != (WORD_DIM,):
            raise ValueError(
                f"{source}: vector for {token!r} has dim {vector.shape[0]}, expected {WORD_DIM}"
            )
        selected[token] = vector

    manifest = ExportManifest(source=str(source))
    missing = len(wanted) - len(selected)
    if not selected:
        message = f"no vocabulary tokens found in {source}; writing an empty table"
        warnings.warn(message)
        manifest.warnings.append(message)
    elif missing:
        manifest.warnings.append(f"{missing} vocabulary tokens absent from the source, omitted")

    ordered = {token: selected[token] for token in sorted(selected)}
    write_embeddings(out_path, WORD_DIM, ordered)
    manifest.add_output(out_path, EMB1_MAGIC.decode(), WORD_DIM, len(ordered))
    return manifest


def read_vocab_file(path) -> list[str]:
    """One token per line; blank lines ignored; order preserved, deduplicated."""
    seen = {}
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            token = line.strip()
            if token:
                seen.setdefault(token, None)
    return list(seen)
