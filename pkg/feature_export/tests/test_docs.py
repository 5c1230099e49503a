import json

import numpy as np
import pytest

from feature_export.docs import export_doc_vectors, load_word_source, mean_word_vectorizer
from feature_export.formats import read_embeddings, write_embeddings


def write_corpus(path, records):
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record) + "\n")
    return path


def record(record_id, title, description="background text"):
    return {
        "id": record_id,
        "postText": [title],
        "targetDescription": description,
        "postMedia": [],
    }


@pytest.fixture
def word_vectors():
    rng = np.random.default_rng(7)
    return {w: rng.normal(0.0, 0.2, 300) for w in ["alpha", "beta", "gamma"]}


class TestMeanVectorizer:
    def test_exact_mean_of_known_tokens(self, word_vectors):
        vectorize = mean_word_vectorizer(word_vectors)
        got = vectorize("Alpha beta!")
        expected = (word_vectors["alpha"] + word_vectors["beta"]) / 2.0
        assert np.array_equal(got, expected)

    def test_unknown_tokens_are_ignored(self, word_vectors):
        vectorize = mean_word_vectorizer(word_vectors)
        assert np.array_equal(vectorize("alpha zzz"), word_vectors["alpha"])

    def test_all_unknown_gives_zeros(self, word_vectors):
        vectorize = mean_word_vectorizer(word_vectors)
        got = vectorize("nothing known here")
        assert got.shape == (300,)
        assert np.all(got == 0.0)

    def test_empty_text_gives_zeros(self, word_vectors):
        assert np.all(mean_word_vectorizer(word_vectors)("") == 0.0)


class TestLoadWordSource:
    def test_reads_emb1(self, word_vectors, tmp_path):
        path = tmp_path / "words.emb1"
        write_embeddings(path, 300, word_vectors)
        loaded = load_word_source(path)
        assert set(loaded) == set(word_vectors)
        for token in loaded:
            assert np.array_equal(
                loaded[token], word_vectors[token].astype("<f4").astype(np.float64)
            )

    def test_reads_word2vec_text(self, word2vec_text):
        path, vectors = word2vec_text
        loaded = load_word_source(path)
        assert set(loaded) == set(vectors)

    def test_emb1_dim_mismatch(self, tmp_path):
        path = tmp_path / "small.emb1"
        write_embeddings(path, 10, {"tok": np.zeros(10)})
        with pytest.raises(ValueError) as err:
            load_word_source(path)
        assert "300" in str(err.value)

    def test_text_dim_mismatch(self, tmp_path):
        path = tmp_path / "small.txt"
        path.write_text("tok 1.0 2.0 3.0\n")
        with pytest.raises(ValueError) as err:
            load_word_source(path)
        assert "300" in str(err.value)


class TestExportDocVectors:
    def test_two_keys_per_record(self, word_vectors, tmp_path):
        corpus = write_corpus(
            tmp_path / "c.jsonl",
            [record("p1", "alpha beta"), record("p2", "gamma")],
        )
        out = tmp_path / "docs.emb1"
        manifest = export_doc_vectors(corpus, out, mean_word_vectorizer(word_vectors))
        dim, table = read_embeddings(out)
        assert dim == 300
        assert set(table) == {"p1:title", "p1:description", "p2:title", "p2:description"}
        assert manifest.outputs[0].count == 4

    def test_title_vector_is_vectorizer_output(self, word_vectors, tmp_path):
        corpus = write_corpus(tmp_path / "c.jsonl", [record("p1", "alpha beta")])
        out = tmp_path / "docs.emb1"
        export_doc_vectors(corpus, out, mean_word_vectorizer(word_vectors))
        _, table = read_embeddings(out)
        expected = (word_vectors["alpha"] + word_vectors["beta"]) / 2.0
        assert np.array_equal(table["p1:title"], expected.astype("<f4").astype(np.float64))

    def test_duplicate_texts_yield_identical_vectors(self, word_vectors, tmp_path):
        corpus = write_corpus(
            tmp_path / "c.jsonl",
            [record("p1", "alpha beta", "gamma"), record("p2", "alpha beta", "gamma")],
        )
        out = tmp_path / "docs.emb1"
        export_doc_vectors(corpus, out, mean_word_vectorizer(word_vectors))
        _, table = read_embeddings(out)
        assert np.array_equal(table["p1:title"], table["p2:title"])
        assert np.array_equal(table["p1:description"], table["p2:description"])

    def test_no_usable_records_rejected(self, word_vectors, tmp_path):
        corpus = tmp_path / "c.jsonl"
        corpus.write_text("not json\n")
        with pytest.raises(ValueError):
            export_doc_vectors(corpus, tmp_path / "docs.emb1", mean_word_vectorizer(word_vectors))

    def test_corpus_problems_become_manifest_warnings(self, word_vectors, tmp_path):
        corpus = tmp_path / "c.jsonl"
        with open(corpus, "w", encoding="utf-8") as handle:
            handle.write(json.dumps(record("p1", "alpha")) + "\n")
            handle.write("{broken\n")
        manifest = export_doc_vectors(
            corpus, tmp_path / "docs.emb1", mean_word_vectorizer(word_vectors)
        )
        assert len(manifest.warnings) == 1
        assert "line 2" in manifest.warnings[0]

    def test_duplicate_record_ids_reported_not_fatal(self, word_vectors, tmp_path):
        corpus = write_corpus(
            tmp_path / "c.jsonl", [record("p1", "alpha"), record("p1", "beta")]
        )
        manifest = export_doc_vectors(
            corpus, tmp_path / "docs.emb1", mean_word_vectorizer(word_vectors)
        )
        assert any("duplicate" in w for w in manifest.warnings)
        _, table = read_embeddings(tmp_path / "docs.emb1")
        assert set(table) == {"p1:title", "p1:description"}
