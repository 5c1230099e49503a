"""Minimal JSONL corpus reading for the exporters.

Only the fields the exporters need: id, postText, targetDescription, and
postMedia. Lines that fail to parse are collected, not fatal.
"""

from __future__ import annotations

import json
from dataclasses import dataclass


@dataclass
class CorpusEntry:
    id: str
    title_text: str
    description_text: str
    image_id: str | None


def _as_text(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, list) and all(isinstance(v, str) for v in value):
        return " ".join(value)
    raise ValueError("expected a string or list of strings")


def read_corpus(path) -> tuple[list[CorpusEntry], list[str]]:
    entries: list[CorpusEntry] = []
    problems: list[str] = []
    seen_ids: set[str] = set()
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                record_id = str(obj["id"])
                if record_id in seen_ids:
                    raise ValueError(f"duplicate id {record_id!r}")
                seen_ids.add(record_id)
                media = obj.get("postMedia")
                if isinstance(media, list):
                    media = next((m for m in media if isinstance(m, str) and m), None)
                entries.append(
                    CorpusEntry(
                        id=record_id,
                        title_text=_as_text(obj["postText"]),
                        description_text=_as_text(obj.get("targetDescription", "")),
                        image_id=media or None,
                    )
                )
            except (ValueError, KeyError, TypeError) as exc:
                problems.append(f"line {lineno}: {exc}")
    return entries, problems
