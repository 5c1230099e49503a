"""Byte-exact file formats: JSONL corpora, binary vector tables, checkpoints.

Binary layouts (all integers little-endian u32, floats little-endian):

  EMB1 (embedding table) and FTB1 (image feature bank):
      magic(4) | dim | count | count x [token_len | token utf-8 | dim x f32]

  checkpoint:
      magic "CKP1" | version | sha256(payload, 32 bytes) | payload
      payload = meta_len | meta json utf-8 | n_tensors |
                n_tensors x [name_len | name | ndim | ndim x dim | f64 data]

Readers reject wrong magic, truncation (naming what was being read),
trailing bytes, duplicate keys, checksum mismatches, and unknown versions
with distinct error classes. Writers emit deterministic bytes.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .embeddings import CharCnnParams, EmbeddingTable, tokenize
from .model import (
    AttentionParams,
    FusionParams,
    LstmCellParams,
    ModelConfig,
    ModelParams,
    SiameseParams,
)
from .tensor import Tensor


class FileFormatError(ValueError):
    """Base class for malformed binary files."""


class BadMagicError(FileFormatError):
    pass


class TruncatedFileError(FileFormatError):
    pass


class TrailingDataError(FileFormatError):
    pass


class DuplicateTokenError(FileFormatError):
    pass


class ChecksumError(FileFormatError):
    pass


class VersionError(FileFormatError):
    pass


EMBEDDING_MAGIC = b"EMB1"
FEATURE_BANK_MAGIC = b"FTB1"
CHECKPOINT_MAGIC = b"CKP1"
CHECKPOINT_VERSION = 1


# ---------------------------------------------------------------------------
# corpus


@dataclass
class PostRecord:
    """One social-media post with its linked article and optional image."""

    id: str
    post_title_tokens: list[str]
    target_title: str
    target_description: str
    target_keywords: list[str]
    image_id: str | None
    label: int  # 1 = clickbait


@dataclass
class LineError:
    line: int  # 1-based line number in the file
    reason: str


@dataclass
class ParsedCorpus:
    records: list[PostRecord]
    errors: list[LineError]


def _as_text(value, what: str) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, list) and all(isinstance(v, str) for v in value):
        return " ".join(value)
    raise ValueError(f"{what} must be a string or list of strings")


def _record_from_json(obj: dict) -> PostRecord:
    for name in ("id", "postText", "targetTitle", "targetDescription"):
        if name not in obj:
            raise ValueError(f"missing field {name!r}")
    if "label" in obj:
        label = obj["label"]
        if label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {label!r}")
    elif "truthMean" in obj:
        truth = obj["truthMean"]
        if not isinstance(truth, (int, float)) or isinstance(truth, bool):
            raise ValueError(f"truthMean must be numeric, got {truth!r}")
        label = 1 if truth >= 0.5 else 0
    else:
        raise ValueError("missing field 'label' (or 'truthMean')")

    keywords_raw = obj.get("targetKeywords", [])
    if isinstance(keywords_raw, str):
        keywords = [k.strip() for k in keywords_raw.split(",") if k.strip()]
    elif isinstance(keywords_raw, list) and all(isinstance(k, str) for k in keywords_raw):
        keywords = keywords_raw
    else:
        raise ValueError("targetKeywords must be a string or list of strings")

    media = obj.get("postMedia")
    if isinstance(media, list):
        media = next((m for m in media if isinstance(m, str) and m), None)
    if media is not None and not isinstance(media, str):
        raise ValueError("postMedia must be a string or list of strings")

    return PostRecord(
        id=str(obj["id"]),
        post_title_tokens=tokenize(_as_text(obj["postText"], "postText")),
        target_title=_as_text(obj["targetTitle"], "targetTitle"),
        target_description=_as_text(obj["targetDescription"], "targetDescription"),
        target_keywords=keywords,
        image_id=media or None,
        label=int(label),
    )


def parse_corpus(path) -> ParsedCorpus:
    """Parse a JSONL corpus, collecting per-line errors instead of raising.

    Malformed lines, missing mandatory fields, and duplicate record ids are
    reported with their 1-based line numbers; valid records keep file order.
    """
    records: list[PostRecord] = []
    errors: list[LineError] = []
    seen_ids: set[str] = set()
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                if not isinstance(obj, dict):
                    raise ValueError("line is not a JSON object")
                record = _record_from_json(obj)
                if record.id in seen_ids:
                    raise ValueError(f"duplicate id {record.id!r}")
            except ValueError as exc:
                errors.append(LineError(line=line_no, reason=str(exc)))
                continue
            seen_ids.add(record.id)
            records.append(record)
    return ParsedCorpus(records=records, errors=errors)


# ---------------------------------------------------------------------------
# binary vector files


@dataclass
class FeatureBank:
    """Fixed-width image feature vectors keyed by image id."""

    dim: int
    entries: dict[str, np.ndarray]

    def __len__(self) -> int:
        return len(self.entries)


class _Reader:
    __slots__ = ("blob", "pos", "path")

    def __init__(self, blob: bytes, path: str):
        self.blob = blob
        self.pos = 0
        self.path = path

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.blob):
            raise TruncatedFileError(f"{self.path}: truncated while reading {what}")
        chunk = self.blob[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]

    @property
    def remaining(self) -> int:
        return len(self.blob) - self.pos


def _read_vector_file(path, magic: bytes) -> tuple[int, dict[str, np.ndarray]]:
    path = str(path)
    reader = _Reader(Path(path).read_bytes(), path)
    found = reader.take(4, "magic")
    if found != magic:
        raise BadMagicError(f"{path}: bad magic {found!r}, expected {magic!r}")
    dim = reader.u32("dim")
    count = reader.u32("count")
    if dim < 1:
        raise FileFormatError(f"{path}: dim must be positive, got {dim}")
    entries: dict[str, np.ndarray] = {}
    for i in range(count):
        token_len = reader.u32(f"length of token {i}")
        token_bytes = reader.take(token_len, f"token {i}")
        try:
            token = token_bytes.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FileFormatError(f"{path}: token {i} is not valid UTF-8") from exc
        if token in entries:
            raise DuplicateTokenError(f"{path}: duplicate token {token!r} at index {i}")
        raw = reader.take(4 * dim, f"vector for token {i} ({token!r})")
        entries[token] = np.frombuffer(raw, dtype="<f4").astype(np.float64)
    if reader.remaining:
        raise TrailingDataError(f"{path}: {reader.remaining} trailing bytes after {count} entries")
    return dim, entries


def _write_vector_file(path, magic: bytes, dim: int, entries: dict[str, np.ndarray]) -> None:
    out = bytearray()
    out += magic
    out += struct.pack("<II", dim, len(entries))
    for token, vec in entries.items():
        token_bytes = token.encode("utf-8")
        out += struct.pack("<I", len(token_bytes))
        out += token_bytes
        vec = np.asarray(vec, dtype="<f4")
        if vec.shape != (dim,):
            raise ValueError(f"vector for {token!r} has shape {vec.shape}, expected ({dim},)")
        out += vec.tobytes()
    Path(path).write_bytes(bytes(out))


def read_embedding_file(path) -> EmbeddingTable:
    dim, entries = _read_vector_file(path, EMBEDDING_MAGIC)
    return EmbeddingTable(dim=dim, entries=entries)


def write_embedding_file(path, table: EmbeddingTable) -> None:
    _write_vector_file(path, EMBEDDING_MAGIC, table.dim, table.entries)


def read_feature_bank(path) -> FeatureBank:
    dim, entries = _read_vector_file(path, FEATURE_BANK_MAGIC)
    return FeatureBank(dim=dim, entries=entries)


def write_feature_bank(path, bank: FeatureBank) -> None:
    _write_vector_file(path, FEATURE_BANK_MAGIC, bank.dim, bank.entries)


def missing_feature_ids(records: Sequence[PostRecord], bank: FeatureBank | None) -> list[str]:
    """Image ids referenced by the corpus but absent from the bank (deduped,
    in first-reference order). With no bank at all, nothing is reported."""
    if bank is None:
        return []
    missing: list[str] = []
    seen: set[str] = set()
    for record in records:
        image_id = record.image_id
        if image_id and image_id not in bank.entries and image_id not in seen:
            seen.add(image_id)
            missing.append(image_id)
    return missing


# ---------------------------------------------------------------------------
# checkpoints


@dataclass
class CheckpointData:
    params: ModelParams
    config: dict
    title_cap: int


def save_checkpoint(path, params: ModelParams, config: dict, title_cap: int) -> None:
    """Serialize params plus hyperparameters; refuses non-finite weights.

    Output bytes are a pure function of the arguments (sorted-key JSON meta,
    fixed tensor order), so identical runs produce identical files.
    """
    named = params.named_tensors()
    for name, tensor in named.items():
        if not np.all(np.isfinite(tensor.data)):
            raise ValueError(f"refusing to save non-finite values in {name}")
    meta = {
        "title_cap": title_cap,
        "model_config": {
            **{k: getattr(params.config, k) for k in ModelConfig.__dataclass_fields__},
            "char_channels": list(params.config.char_channels),
        },
        "char_index": params.char_cnn.char_index,
        "config": config,
    }
    meta_bytes = json.dumps(meta, sort_keys=True).encode("utf-8")
    payload = bytearray()
    payload += struct.pack("<I", len(meta_bytes))
    payload += meta_bytes
    payload += struct.pack("<I", len(named))
    for name, tensor in named.items():
        name_bytes = name.encode("utf-8")
        payload += struct.pack("<I", len(name_bytes))
        payload += name_bytes
        shape = tensor.data.shape
        payload += struct.pack("<I", len(shape))
        payload += struct.pack(f"<{len(shape)}I", *shape) if shape else b""
        payload += np.asarray(tensor.data, dtype="<f8").tobytes()
    blob = CHECKPOINT_MAGIC + struct.pack("<I", CHECKPOINT_VERSION)
    blob += hashlib.sha256(payload).digest()
    blob += bytes(payload)
    Path(path).write_bytes(blob)


def _rebuild_params(
    meta: dict, tensors: dict[str, Tensor], path: str
) -> ModelParams:
    def need(name: str) -> Tensor:
        if name not in tensors:
            raise FileFormatError(f"{path}: checkpoint is missing tensor {name!r}")
        return tensors[name]

    raw_config = dict(meta["model_config"])
    raw_config["char_channels"] = tuple(raw_config["char_channels"])
    config = ModelConfig(**raw_config)
    convs = [
        (need(f"char_cnn.conv{i}.kernels"), need(f"char_cnn.conv{i}.bias"))
        for i in range(len(config.char_channels))
    ]

    def lstm(tag: str) -> LstmCellParams:
        return LstmCellParams(
            gate_weights=need(f"{tag}.gate_weights"),
            gate_bias=need(f"{tag}.gate_bias"),
            candidate_weights=need(f"{tag}.candidate_weights"),
            candidate_bias=need(f"{tag}.candidate_bias"),
        )

    def siamese(tag: str, with_projection: bool) -> SiameseParams:
        return SiameseParams(
            layer1_w=need(f"{tag}.layer1_w"),
            layer1_b=need(f"{tag}.layer1_b"),
            layer2_w=need(f"{tag}.layer2_w"),
            layer2_b=need(f"{tag}.layer2_b"),
            project_w=need(f"{tag}.project_w") if with_projection else None,
            project_b=need(f"{tag}.project_b") if with_projection else None,
        )

    return ModelParams(
        config=config,
        title_cap=int(meta["title_cap"]),
        char_cnn=CharCnnParams(
            char_index=dict(meta["char_index"]),
            table=need("char_cnn.table"),
            convs=convs,
            width=config.conv_width,
        ),
        lstm_fwd=lstm("lstm_fwd"),
        lstm_bwd=lstm("lstm_bwd"),
        attention=AttentionParams(
            score_weights=need("attention.score_weights"),
            score_vector=need("attention.score_vector"),
        ),
        text_siamese=siamese("text_siamese", with_projection=False),
        visual_siamese=siamese("visual_siamese", with_projection=True),
        fusion=FusionParams(weights=need("fusion.weights"), bias=need("fusion.bias")),
    )


def load_checkpoint(path) -> CheckpointData:
    """Inverse of save_checkpoint; load(save(x)) is bit-identical on params."""
    path = str(path)
    blob = Path(path).read_bytes()
    reader = _Reader(blob, path)
    found = reader.take(4, "magic")
    if found != CHECKPOINT_MAGIC:
        raise BadMagicError(f"{path}: bad magic {found!r}, expected {CHECKPOINT_MAGIC!r}")
    version = reader.u32("version")
    if version != CHECKPOINT_VERSION:
        raise VersionError(f"{path}: unsupported checkpoint version {version}")
    digest = reader.take(32, "checksum")
    payload = reader.take(reader.remaining, "payload")
    if hashlib.sha256(payload).digest() != digest:
        raise ChecksumError(f"{path}: payload checksum mismatch (file corrupted)")

    reader = _Reader(payload, path)
    meta_len = reader.u32("meta length")
    meta = json.loads(reader.take(meta_len, "meta").decode("utf-8"))
    n_tensors = reader.u32("tensor count")
    tensors: dict[str, Tensor] = {}
    for i in range(n_tensors):
        name_len = reader.u32(f"name length of tensor {i}")
        name = reader.take(name_len, f"name of tensor {i}").decode("utf-8")
        ndim = reader.u32(f"rank of tensor {name!r}")
        shape = tuple(
            struct.unpack(f"<{ndim}I", reader.take(4 * ndim, f"shape of tensor {name!r}"))
        )
        size = int(np.prod(shape, dtype=np.int64)) if shape else 1
        raw = reader.take(8 * size, f"data of tensor {name!r}")
        data = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
        tensors[name] = Tensor(data, requires_grad=True)
    if reader.remaining:
        raise TrailingDataError(f"{path}: {reader.remaining} trailing bytes in payload")

    params = _rebuild_params(meta, tensors, path)
    return CheckpointData(params=params, config=meta["config"], title_cap=int(meta["title_cap"]))
