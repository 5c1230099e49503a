from pathlib import Path

import pytest

from clickbait_hybrid import data_io
from clickbait_hybrid.model import FeatureTables, ModelConfig

FIXTURE_DIR = Path(__file__).parent / "fixtures" / "overfit64"


@pytest.fixture(scope="session")
def overfit_paths() -> dict:
    return {
        "corpus": FIXTURE_DIR / "corpus.jsonl",
        "words": FIXTURE_DIR / "words.emb1",
        "docs": FIXTURE_DIR / "docs.emb1",
        "images": FIXTURE_DIR / "images.ftb1",
    }


@pytest.fixture(scope="session")
def overfit_records(overfit_paths):
    parsed = data_io.parse_corpus(overfit_paths["corpus"])
    assert not parsed.errors
    return parsed.records


@pytest.fixture(scope="session")
def overfit_tables(overfit_paths) -> FeatureTables:
    return FeatureTables(
        word=data_io.read_embedding_file(overfit_paths["words"]),
        doc=data_io.read_embedding_file(overfit_paths["docs"]),
        images=data_io.read_feature_bank(overfit_paths["images"]),
    )


@pytest.fixture()
def small_config() -> ModelConfig:
    """Narrow widths keep graph-heavy tests fast; word/doc/image dims stay real."""
    return ModelConfig(
        hidden_size=8,
        attention_size=6,
        char_dim=4,
        char_channels=(5, 5, 6),
        siamese_hidden=10,
        siamese_out=7,
    )
