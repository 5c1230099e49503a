"""Generate small, separable labeled corpora with matching feature files.

The two classes are distinguishable through every input the downstream model
reads: clickbait and news titles draw from disjoint vocabularies, the word
vectors of the two vocabularies live in different half-spaces, the document
vectors of a post's title and its article description point opposite ways
for clickbait and the same way for news, and the image features carry a
class offset. A model with working gradients therefore overfits such a
corpus in a handful of epochs.

Output bytes are a pure function of (n, clickbait_fraction, seed).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .formats import EMB1_MAGIC, FTB1_MAGIC, write_embeddings, write_features
from .manifest import DOC_DIM, IMAGE_DIM, WORD_DIM, ExportManifest

CLICKBAIT_WORDS = [
    "shocking", "unbelievable", "secret", "miracle", "insane", "epic",
    "jawdropping", "exposed", "weird", "hack", "trick", "guess",
    "stunned", "unreal",
]
NEWS_WORDS = [
    "council", "budget", "minister", "report", "quarterly", "election",
    "committee", "announces", "review", "policy", "regional", "update",
    "infrastructure", "statement",
]
NEUTRAL_WORDS = ["today", "new", "local", "annual", "about", "this"]

_IMAGE_FRACTION = 0.6  # some posts stay imageless so that path trains too


@dataclass
class SyntheticPaths:
    corpus: Path
    words: Path
    docs: Path
    images: Path
    manifest: Path


def gen_synthetic_corpus(
    n: int, clickbait_fraction: float, seed: int, out_dir
) -> tuple[SyntheticPaths, ExportManifest]:
    """Write corpus.jsonl, words.emb1, docs.emb1, and images.ftb1 under out_dir."""
    if n < 10:
        raise ValueError(f"need n >= 10, got {n}")
    if not 0.0 <= clickbait_fraction <= 1.0:
        raise ValueError(f"clickbait_fraction must be in [0, 1], got {clickbait_fraction}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = SyntheticPaths(
        corpus=out_dir / "corpus.jsonl",
        words=out_dir / "words.emb1",
        docs=out_dir / "docs.emb1",
        images=out_dir / "images.ftb1",
        manifest=out_dir / "export.manifest.json",
    )

    rng = np.random.default_rng(seed)
    n_bait = round(n * clickbait_fraction)
    labels = [1] * n_bait + [0] * (n - n_bait)

    word_vectors = _make_word_vectors(rng)

    records = []
    doc_vectors: dict[str, np.ndarray] = {}
    image_bank: dict[str, np.ndarray] = {}
    for index, label in enumerate(labels):
        record_id = f"syn{index:04d}"
        lexicon = CLICKBAIT_WORDS if label else NEWS_WORDS
        title_tokens = _sample_title(rng, lexicon)
        description_tokens = _sample_title(rng, lexicon)

        title_vec = rng.normal(0.0, 0.1, DOC_DIM)
        flip = -1.0 if label else 1.0
        desc_vec = flip * title_vec + rng.normal(0.0, 0.01, DOC_DIM)
        doc_vectors[f"{record_id}:title"] = title_vec
        doc_vectors[f"{record_id}:description"] = desc_vec

        image_id = None
        if rng.random() < _IMAGE_FRACTION:
            image_id = f"img{index:04d}"
            image_bank[image_id] = _image_vector(rng, label)

        records.append(
            {
                "id": record_id,
                "postText": [" ".join(title_tokens)],
                "targetTitle": " ".join(_sample_title(rng, lexicon)),
                "targetDescription": " ".join(description_tokens),
                "targetKeywords": ", ".join(lexicon[:2]),
                "postMedia": [image_id] if image_id else [],
                "label": label,
            }
        )

    order = rng.permutation(n)
    with open(paths.corpus, "w", encoding="utf-8") as handle:
        for i in order:
            handle.write(json.dumps(records[i], sort_keys=True) + "\n")
    write_embeddings(paths.words, WORD_DIM, word_vectors)
    write_embeddings(paths.docs, DOC_DIM, doc_vectors)
    write_features(paths.images, IMAGE_DIM, image_bank)

    manifest = ExportManifest(source=f"synthetic(n={n}, fraction={clickbait_fraction}, seed={seed})")
    manifest.add_output(paths.corpus, "JSONL", 0, n)
    manifest.add_output(paths.words, EMB1_MAGIC.decode(), WORD_DIM, len(word_vectors))
    manifest.add_output(paths.docs, EMB1_MAGIC.decode(), DOC_DIM, len(doc_vectors))
    manifest.add_output(paths.images, FTB1_MAGIC.decode(), IMAGE_DIM, len(image_bank))
    manifest.save(paths.manifest)
    return paths, manifest


def _make_word_vectors(rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Class vocabularies sit in opposite half-spaces of the first 20 dims."""
    vectors: dict[str, np.ndarray] = {}
    for words, offset in ((CLICKBAIT_WORDS, 0.3), (NEWS_WORDS, -0.3), (NEUTRAL_WORDS, 0.0)):
        for word in words:
            vec = rng.normal(0.0, 0.05, WORD_DIM)
            vec[:20] += offset
            # store exactly what the f32 file will hold, so fixtures are
            # reproducible from the file alone
            vectors[word] = vec.astype("<f4").astype(np.float64)
    return vectors


def _sample_title(rng: np.random.Generator, lexicon: list[str]) -> list[str]:
    n_class = int(rng.integers(3, 6))
    n_neutral = int(rng.integers(1, 3))
    tokens = [lexicon[int(i)] for i in rng.integers(0, len(lexicon), n_class)]
    tokens += [NEUTRAL_WORDS[int(i)] for i in rng.integers(0, len(NEUTRAL_WORDS), n_neutral)]
    rng.shuffle(tokens)
    return tokens


def _image_vector(rng: np.random.Generator, label: int) -> np.ndarray:
    vec = rng.normal(0.0, 0.01, IMAGE_DIM)
    vec[:64] += 0.05 if label else -0.05
    return vec
