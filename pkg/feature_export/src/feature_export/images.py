"""Export image features into an FTB1 bank (4096 floats per image).

Two extractors are available:

* ``vgg19_fc7_extractor(weights_path)`` — the FC7 activation (the second
  fully-connected layer, 4096-dim) of a VGG-19 whose weights the caller
  supplies as a torchvision state dict. Requires the ``vgg`` extra.
* ``projection_extractor(seed)`` — a dependency-free stand-in: images are
  decoded, resized to 64x64 RGB, and mapped through a fixed seeded Gaussian
  projection to 4096 dims. Deterministic per seed; useful wherever real
  VGG-19 weights are unavailable and only the file plumbing matters.

Undecodable images are skipped and listed in the manifest; duplicate image
ids abort the export before anything is written.
"""

from __future__ import annotations

from collections import Counter
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError

from .formats import FTB1_MAGIC, write_features
from .manifest import IMAGE_DIM, ExportManifest

Extractor = Callable[[Image.Image], np.ndarray]

_THUMB = 64  # projection extractor input edge


def projection_extractor(seed: int = 0) -> Extractor:
    """Seeded Gaussian projection of the downsampled RGB pixels to 4096 dims."""
    flat = _THUMB * _THUMB * 3
    projection = np.random.default_rng(seed).normal(0.0, 1.0 / np.sqrt(flat), (flat, IMAGE_DIM))

    def extract(image: Image.Image) -> np.ndarray:
        small = image.convert("RGB").resize((_THUMB, _THUMB), Image.BILINEAR)
        pixels = np.asarray(small, dtype=np.float64).reshape(-1) / 255.0
        return pixels @ projection

    return extract


def vgg19_fc7_extractor(weights_path) -> Extractor:
    """FC7 features from a VGG-19 state dict (torchvision layout)."""
    try:
        import torch
        from torchvision import models
    except ImportError as exc:  # pragma: no cover - optional dependency
        raise RuntimeError(
            "VGG-19 extraction requires torch/torchvision; install feature-export[vgg]"
        ) from exc
    model = models.vgg19(weights=None)
    state = torch.load(str(weights_path), map_location="cpu", weights_only=True)
    model.load_state_dict(state)
    return _fc7_extractor(model)


def _fc7_extractor(model) -> Extractor:
    """FC7 = the classifier through its second linear layer, in eval mode."""
    import torch
    from torchvision import transforms

    model.eval()
    fc7 = model.classifier[:5]  # linear, relu, dropout, linear, relu
    preprocess = transforms.Compose(
        [
            transforms.Resize(256),
            transforms.CenterCrop(224),
            transforms.ToTensor(),
            transforms.Normalize(
                mean=[0.485, 0.456, 0.406], std=[0.229, 0.224, 0.225]
            ),
        ]
    )

    def extract(image: Image.Image) -> np.ndarray:
        with torch.no_grad():
            batch = preprocess(image.convert("RGB")).unsqueeze(0)
            features = model.avgpool(model.features(batch)).flatten(1)
            return fc7(features).squeeze(0).double().numpy()

    return extract


def collect_images(directory) -> list[tuple[str, Path]]:
    """(id, path) pairs for every regular file in a directory, sorted by name."""
    root = Path(directory)
    if not root.is_dir():
        raise NotADirectoryError(f"{directory} is not a directory")
    return [(p.name, p) for p in sorted(root.iterdir()) if p.is_file()]


def read_image_list(path) -> list[tuple[str, Path]]:
    """Tab-separated ``id<TAB>path`` lines."""
    pairs = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if "\t" not in line:
                raise ValueError(f"{path}: line {lineno}: expected id<TAB>path")
            image_id, image_path = line.split("\t", 1)
            pairs.append((image_id, Path(image_path)))
    return pairs


def export_image_features(
    images: Sequence[tuple[str, Path]], out_path, extractor: Extractor
) -> ExportManifest:
    counts = Counter(image_id for image_id, _ in images)
    duplicates = sorted(i for i, n in counts.items() if n > 1)
    if duplicates:
        raise ValueError(f"duplicate image ids: {', '.join(duplicates)}")

    manifest = ExportManifest(source="; ".join(str(p) for _, p in images))
    bank: dict[str, np.ndarray] = {}
    for image_id, path in images:
        try:
            with Image.open(path) as image:
                vector = extractor(image)
        except (OSError, UnidentifiedImageError) as exc:
            manifest.skipped.append(image_id)
            manifest.warnings.append(f"skipped {image_id}: {exc}")
            continue
        bank[image_id] = np.asarray(vector, dtype=np.float64)

    write_features(out_path, IMAGE_DIM, bank)
    manifest.add_output(out_path, FTB1_MAGIC.decode(), IMAGE_DIM, len(bank))
    return manifest
