#!/usr/bin/env python3
"""Regenerate the checked-in 64-record overfit fixture.

The corpus is separable by construction: clickbait and news titles draw from
disjoint vocabularies whose word vectors live in opposite half-spaces, the
title/description document vectors agree for news and disagree for clickbait,
and attached images carry a class-aligned pattern. Everything is a pure
function of SEED, so reruns are byte-identical.

Usage: python3 scripts/make_overfit_fixture.py [out_dir]
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np

from clickbait_hybrid.data_io import FeatureBank, write_embedding_file, write_feature_bank
from clickbait_hybrid.embeddings import EmbeddingTable, description_doc_id, title_doc_id

SEED = 7
N_RECORDS = 64
N_IMAGES = 24
WORD_DIM = 300
IMAGE_DIM = 4096

BAIT_WORDS = [
    "shocking", "unbelievable", "secret", "trick", "amazing", "weird",
    "reasons", "hack", "insane", "crazy", "epic", "miracle", "exposed", "viral",
]
NEWS_WORDS = [
    "council", "budget", "report", "minister", "market", "quarterly",
    "results", "region", "election", "policy", "study", "data", "review", "announces",
]
NEUTRAL_WORDS = ["the", "new", "about", "today", "local", "annual"]


def build_word_table(rng: np.random.Generator) -> EmbeddingTable:
    entries: dict[str, np.ndarray] = {}
    for words, offset in ((BAIT_WORDS, 0.3), (NEWS_WORDS, -0.3), (NEUTRAL_WORDS, 0.0)):
        for word in words:
            vec = rng.normal(0.0, 0.05, WORD_DIM)
            vec[:20] += offset
            entries[word] = vec.astype("<f4").astype(np.float64)
    return EmbeddingTable(dim=WORD_DIM, entries=entries)


def make_title(rng: np.random.Generator, bait: bool) -> list[str]:
    pool = BAIT_WORDS if bait else NEWS_WORDS
    n_class = int(rng.integers(3, 6))
    n_neutral = int(rng.integers(1, 3))
    tokens = [pool[int(rng.integers(0, len(pool)))] for _ in range(n_class)]
    tokens += [NEUTRAL_WORDS[int(rng.integers(0, len(NEUTRAL_WORDS)))] for _ in range(n_neutral)]
    order = rng.permutation(len(tokens))
    return [tokens[i] for i in order]


def main(out_dir: Path) -> None:
    rng = np.random.default_rng(SEED)
    word_table = build_word_table(rng)

    labels = [1] * (N_RECORDS // 2) + [0] * (N_RECORDS // 2)
    image_slots = list(range(N_IMAGES))  # first 12 bait records, then 12 news records

    records = []
    doc_entries: dict[str, np.ndarray] = {}
    image_entries: dict[str, np.ndarray] = {}
    for i, label in enumerate(labels):
        bait = label == 1
        record_id = f"post{i:03d}"
        title_tokens = make_title(rng, bait)
        title_vec = rng.normal(0.0, 0.1, WORD_DIM)
        if bait:
            desc_vec = -title_vec + rng.normal(0.0, 0.02, WORD_DIM)
        else:
            desc_vec = title_vec + rng.normal(0.0, 0.02, WORD_DIM)
        doc_entries[title_doc_id(record_id)] = title_vec.astype("<f4").astype(np.float64)
        doc_entries[description_doc_id(record_id)] = desc_vec.astype("<f4").astype(np.float64)

        image_id = None
        within_class = i if bait else i - N_RECORDS // 2
        if within_class < N_IMAGES // 2:
            image_id = f"img{len(image_entries):03d}"
            feat = rng.normal(0.0, 0.01, IMAGE_DIM)
            feat[:64] += 0.05 if bait else -0.05
            image_entries[image_id] = feat.astype("<f4").astype(np.float64)

        desc_words = make_title(rng, bait)
        records.append(
            {
                "id": record_id,
                "postText": [" ".join(title_tokens)],
                "targetTitle": " ".join(make_title(rng, bait)),
                "targetDescription": " ".join(desc_words),
                "targetKeywords": ", ".join(desc_words[:2]),
                "postMedia": [image_id] if image_id else [],
                "truthMean": 0.8 if bait else 0.2,
            }
        )

    # deterministic interleave so labels are not sorted in file order
    order = np.random.default_rng(SEED + 1).permutation(N_RECORDS)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "corpus.jsonl", "w", encoding="utf-8") as handle:
        for i in order:
            handle.write(json.dumps(records[i], sort_keys=True) + "\n")
    write_embedding_file(out_dir / "words.emb1", word_table)
    write_embedding_file(out_dir / "docs.emb1", EmbeddingTable(dim=WORD_DIM, entries=doc_entries))
    write_feature_bank(out_dir / "images.ftb1", FeatureBank(dim=IMAGE_DIM, entries=image_entries))
    print(f"wrote {N_RECORDS} records, {len(doc_entries)} doc vectors, "
          f"{len(image_entries)} image features to {out_dir}")


if __name__ == "__main__":
    target = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "overfit64"
    main(target)
