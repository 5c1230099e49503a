"""Writers (and verifying readers) for the EMB1/FTB1 vector-table formats.

Layout, little-endian throughout:

    magic (4 bytes) | u32 dim | u32 count
    count * ( u32 key_byte_len | utf-8 key | dim * f32 )

EMB1 holds token- or doc-id-keyed embeddings, FTB1 holds image features.
Writing is deterministic: entries are emitted in the order of the mapping,
and equal inputs produce equal bytes.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Mapping

import numpy as np

EMB1_MAGIC = b"EMB1"
FTB1_MAGIC = b"FTB1"


class VectorFileError(ValueError):
    """Base class for malformed vector-table files."""


class BadMagicError(VectorFileError):
    pass


class TruncatedFileError(VectorFileError):
    pass


class TrailingDataError(VectorFileError):
    pass


class DuplicateKeyError(VectorFileError):
    pass


def write_vector_file(path, magic: bytes, dim: int, entries: Mapping[str, np.ndarray]) -> None:
    if dim < 1:
        raise ValueError(f"dim must be positive, got {dim}")
    chunks = [magic, struct.pack("<II", dim, len(entries))]
    for key, vector in entries.items():
        data = np.asarray(vector, dtype="<f4")
        if data.shape != (dim,):
            raise ValueError(f"vector for {key!r} has shape {data.shape}, expected ({dim},)")
        raw_key = key.encode("utf-8")
        chunks.append(struct.pack("<I", len(raw_key)))
        chunks.append(raw_key)
        chunks.append(data.tobytes())
    Path(path).write_bytes(b"".join(chunks))


def read_vector_file(path, magic: bytes) -> tuple[int, dict[str, np.ndarray]]:
    path = str(path)
    blob = Path(path).read_bytes()
    offset = 0

    def take(n: int, what: str) -> bytes:
        nonlocal offset
        if offset + n > len(blob):
            raise TruncatedFileError(f"{path}: truncated while reading {what}")
        piece = blob[offset : offset + n]
        offset += n
        return piece

    found = take(4, "magic")
    if found != magic:
        raise BadMagicError(f"{path}: bad magic {found!r}, expected {magic!r}")
    dim, count = struct.unpack("<II", take(8, "header"))
    if dim < 1:
        raise VectorFileError(f"{path}: dim must be positive, got {dim}")
    entries: dict[str, np.ndarray] = {}
    for i in range(count):
        (key_len,) = struct.unpack("<I", take(4, f"key length of entry {i}"))
        key = take(key_len, f"key of entry {i}").decode("utf-8")
        if key in entries:
            raise DuplicateKeyError(f"{path}: duplicate key {key!r} at index {i}")
        raw = take(4 * dim, f"vector for entry {i} ({key!r})")
        entries[key] = np.frombuffer(raw, dtype="<f4").astype(np.float64)
    if offset != len(blob):
        raise TrailingDataError(f"{path}: {len(blob) - offset} trailing bytes after {count} entries")
    return dim, entries


def write_embeddings(path, dim: int, entries: Mapping[str, np.ndarray]) -> None:
    write_vector_file(path, EMB1_MAGIC, dim, entries)


def read_embeddings(path) -> tuple[int, dict[str, np.ndarray]]:
    return read_vector_file(path, EMB1_MAGIC)


def write_features(path, dim: int, entries: Mapping[str, np.ndarray]) -> None:
    write_vector_file(path, FTB1_MAGIC, dim, entries)


def read_features(path) -> tuple[int, dict[str, np.ndarray]]:
    return read_vector_file(path, FTB1_MAGIC)
