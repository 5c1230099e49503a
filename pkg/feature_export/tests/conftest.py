import numpy as np
import pytest


@pytest.fixture
def word2vec_text(tmp_path):
    """A small word2vec text source with a header line, 300-dim."""
    rng = np.random.default_rng(0)
    vectors = {word: rng.normal(0, 0.2, 300) for word in ["alpha", "beta", "gamma", "delta"]}
    path = tmp_path / "source.txt"
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(f"{len(vectors)} 300\n")
        for word, vec in vectors.items():
            handle.write(word + " " + " ".join(f"{x:.6f}" for x in vec) + "\n")
    return path, vectors
