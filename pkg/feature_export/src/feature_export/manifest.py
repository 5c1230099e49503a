"""Export manifests: what was emitted, from where, and with which checksums."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

WORD_DIM = 300
DOC_DIM = 300
IMAGE_DIM = 4096


@dataclass
class EmittedFile:
    path: str
    kind: str  # "EMB1" or "FTB1"
    dim: int
    count: int
    sha256: str


@dataclass
class ExportManifest:
    source: str
    outputs: list[EmittedFile] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def add_output(self, path, kind: str, dim: int, count: int) -> EmittedFile:
        emitted = EmittedFile(
            path=str(path), kind=kind, dim=dim, count=count, sha256=sha256_of(path)
        )
        self.outputs.append(emitted)
        return emitted

    def to_dict(self) -> dict:
        return asdict(self)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(self.to_dict(), handle, indent=2, sort_keys=True)
            handle.write("\n")

    @classmethod
    def load(cls, path) -> "ExportManifest":
        with open(path, "r", encoding="utf-8") as handle:
            raw = json.load(handle)
        return cls(
            source=raw["source"],
            outputs=[EmittedFile(**entry) for entry in raw["outputs"]],
            skipped=list(raw["skipped"]),
            warnings=list(raw["warnings"]),
        )

    def verify_checksums(self) -> bool:
        """True when every recorded output still matches its bytes on disk."""
        return all(sha256_of(out.path) == out.sha256 for out in self.outputs)


def sha256_of(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def default_manifest_path(out_path) -> str:
    return str(out_path) + ".manifest.json"
