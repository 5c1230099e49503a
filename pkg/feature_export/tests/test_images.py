import numpy as np
import pytest
from PIL import Image

from feature_export.formats import read_features
from feature_export.images import (
    collect_images,
    export_image_features,
    projection_extractor,
    read_image_list,
)


def write_png(path, seed=0, size=(48, 32)):
    rng = np.random.default_rng(seed)
    pixels = rng.integers(0, 256, (size[1], size[0], 3), dtype=np.uint8)
    Image.fromarray(pixels, "RGB").save(path)
    return path


class TestProjectionExtractor:
    def test_output_shape(self, tmp_path):
        path = write_png(tmp_path / "a.png")
        with Image.open(path) as image:
            vector = projection_extractor(seed=0)(image)
        assert vector.shape == (4096,)
        assert np.all(np.isfinite(vector))

    def test_deterministic_per_seed(self, tmp_path):
        path = write_png(tmp_path / "a.png")
        with Image.open(path) as image:
            first = projection_extractor(seed=5)(image)
        with Image.open(path) as image:
            second = projection_extractor(seed=5)(image)
        assert np.array_equal(first, second)

    def test_seed_changes_output(self, tmp_path):
        path = write_png(tmp_path / "a.png")
        with Image.open(path) as image:
            first = projection_extractor(seed=0)(image)
        with Image.open(path) as image:
            second = projection_extractor(seed=1)(image)
        assert not np.array_equal(first, second)

    def test_different_images_differ(self, tmp_path):
        extract = projection_extractor(seed=0)
        with Image.open(write_png(tmp_path / "a.png", seed=1)) as image:
            first = extract(image)
        with Image.open(write_png(tmp_path / "b.png", seed=2)) as image:
            second = extract(image)
        assert not np.array_equal(first, second)


class TestExportImageFeatures:
    def test_exports_all_decodable_images(self, tmp_path):
        pairs = [
            ("img1", write_png(tmp_path / "img1.png", seed=1)),
            ("img2", write_png(tmp_path / "img2.png", seed=2)),
        ]
        out = tmp_path / "bank.ftb1"
        manifest = export_image_features(pairs, out, projection_extractor())
        dim, bank = read_features(out)
        assert dim == 4096
        assert set(bank) == {"img1", "img2"}
        assert manifest.outputs[0].count == 2
        assert manifest.skipped == []

    def test_undecodable_images_skipped_and_listed(self, tmp_path):
        garbage = tmp_path / "broken.png"
        garbage.write_bytes(b"this is not an image")
        pairs = [
            ("good", write_png(tmp_path / "good.png")),
            ("broken", garbage),
        ]
        out = tmp_path / "bank.ftb1"
        manifest = export_image_features(pairs, out, projection_extractor())
        _, bank = read_features(out)
        assert set(bank) == {"good"}
        assert manifest.skipped == ["broken"]
        assert any("broken" in w for w in manifest.warnings)

    def test_missing_file_skipped_not_fatal(self, tmp_path):
        pairs = [
            ("good", write_png(tmp_path / "good.png")),
            ("gone", tmp_path / "nothing.png"),
        ]
        manifest = export_image_features(pairs, tmp_path / "bank.ftb1", projection_extractor())
        assert manifest.skipped == ["gone"]

    def test_duplicate_ids_abort_before_writing(self, tmp_path):
        path = write_png(tmp_path / "a.png")
        out = tmp_path / "bank.ftb1"
        with pytest.raises(ValueError) as err:
            export_image_features([("dup", path), ("dup", path)], out, projection_extractor())
        assert "dup" in str(err.value)
        assert not out.exists()

    def test_vectors_match_direct_extraction(self, tmp_path):
        path = write_png(tmp_path / "a.png", seed=9)
        out = tmp_path / "bank.ftb1"
        export_image_features([("a", path)], out, projection_extractor(seed=0))
        _, bank = read_features(out)
        with Image.open(path) as image:
            expected = projection_extractor(seed=0)(image)
        assert np.array_equal(bank["a"], expected.astype("<f4").astype(np.float64))


class TestImageDiscovery:
    def test_collect_images_sorted_by_name(self, tmp_path):
        write_png(tmp_path / "zeta.png")
        write_png(tmp_path / "alpha.png")
        (tmp_path / "subdir").mkdir()
        pairs = collect_images(tmp_path)
        assert [image_id for image_id, _ in pairs] == ["alpha.png", "zeta.png"]

    def test_collect_images_requires_directory(self, tmp_path):
        with pytest.raises(NotADirectoryError):
            collect_images(tmp_path / "missing")

    def test_read_image_list(self, tmp_path):
        listing = tmp_path / "list.tsv"
        listing.write_text("a\t/tmp/a.png\n\nb\t/tmp/b with space.png\n")
        pairs = read_image_list(listing)
        assert [image_id for image_id, _ in pairs] == ["a", "b"]
        assert str(pairs[1][1]) == "/tmp/b with space.png"

    def test_read_image_list_rejects_untabbed_line(self, tmp_path):
        listing = tmp_path / "list.tsv"
        listing.write_text("a /tmp/a.png\n")
        with pytest.raises(ValueError) as err:
            read_image_list(listing)
        assert "line 1" in str(err.value)


class TestVgg19Extractor:
    def test_fc7_shape_and_determinism(self, tmp_path):
        torch = pytest.importorskip("torch")
        models = pytest.importorskip("torchvision.models")
        from feature_export.images import _fc7_extractor

        torch.manual_seed(0)
        model = models.vgg19(weights=None)
        extract = _fc7_extractor(model)
        path = write_png(tmp_path / "a.png", size=(240, 240))
        with Image.open(path) as image:
            first = extract(image)
        with Image.open(path) as image:
            second = extract(image)
        assert first.shape == (4096,)
        assert np.array_equal(first, second)
