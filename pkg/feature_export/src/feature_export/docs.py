"""Export per-record document vectors into an EMB1 table.

Each corpus record yields two entries, keyed ``<id>:title`` (from postText)
and ``<id>:description`` (from targetDescription). Vectors come from a
pretrained paragraph-vector model when one is supplied (requires gensim),
and otherwise from the mean of the known word vectors of the text — the
same fallback the downstream model applies to ids missing from the table.
"""

from __future__ import annotations

import zlib
from typing import Callable

import numpy as np

from .corpus import read_corpus
from .formats import EMB1_MAGIC, read_embeddings, write_embeddings
from .manifest import DOC_DIM, ExportManifest
from .text import tokenize
from .words import iter_word2vec_text

Vectorizer = Callable[[str], np.ndarray]


def mean_word_vectorizer(word_vectors: dict[str, np.ndarray]) -> Vectorizer:
    """Average the vectors of the text's known tokens; zeros when none are known."""

    def vectorize(text: str) -> np.ndarray:
        found = [word_vectors[t] for t in tokenize(text) if t in word_vectors]
        if not found:
            return np.zeros(DOC_DIM)
        return np.mean(found, axis=0)

    return vectorize


def load_word_source(path) -> dict[str, np.ndarray]:
    """Word vectors from either an EMB1 table or a word2vec text file."""
    with open(path, "rb") as handle:
        is_emb1 = handle.read(4) == b"EMB1"
    if is_emb1:
        dim, entries = read_embeddings(path)
        if dim != DOC_DIM:
            raise ValueError(f"{path}: word vectors have dim {dim}, expected {DOC_DIM}")
        return entries
    vectors = {}
    for token, vector in iter_word2vec_text(path):
        if vector.shape != (DOC_DIM,):
            raise ValueError(
                f"{path}: vector for {token!r} has dim {vector.shape[0]}, expected {DOC_DIM}"
            )
        vectors.setdefault(token, vector)
    return vectors


def doc2vec_vectorizer(model_path, deterministic: bool = True) -> Vectorizer:
    """Infer vectors with a pretrained gensim Doc2Vec model.

    In deterministic mode the inference RNG is reseeded from the text, so the
    same text always yields the same vector (including across duplicate ids).
    """
    try:
        from gensim.models.doc2vec import Doc2Vec
    except ImportError as exc:  # pragma: no cover - optional dependency
        raise RuntimeError(
            "doc2vec inference requires gensim; install feature-export[doc2vec]"
        ) from exc
    model = Doc2Vec.load(str(model_path))
    if model.vector_size != DOC_DIM:
        raise ValueError(
            f"{model_path}: doc2vec model has dim {model.vector_size}, expected {DOC_DIM}"
        )

    def vectorize(text: str) -> np.ndarray:
        tokens = tokenize(text)
        if deterministic:
            model.random.seed(zlib.crc32(text.encode("utf-8")))
        return np.asarray(model.infer_vector(tokens), dtype=np.float64)

    return vectorize


def export_doc_vectors(corpus_path, out_path, vectorizer: Vectorizer) -> ExportManifest:
    entries, problems = read_corpus(corpus_path)
    if not entries:
        raise ValueError(f"{corpus_path}: no usable records")
    table: dict[str, np.ndarray] = {}
    for entry in entries:
        table[f"{entry.id}:title"] = vectorizer(entry.title_text)
        table[f"{entry.id}:description"] = vectorizer(entry.description_text)

    write_embeddings(out_path, DOC_DIM, table)
    manifest = ExportManifest(source=str(corpus_path))
    manifest.warnings.extend(f"skipped corpus {p}" for p in problems)
    manifest.add_output(out_path, EMB1_MAGIC.decode(), DOC_DIM, len(table))
    return manifest
