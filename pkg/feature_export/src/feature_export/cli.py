"""Command-line entry points for the exporters."""

from __future__ import annotations

import argparse
import sys

from . import docs, images, synthetic, words
from .corpus import read_corpus
from .manifest import default_manifest_path
from .text import tokenize


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="feature-export",
        description="produce EMB1/FTB1 inputs and synthetic corpora for the clickbait model",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    p_words = commands.add_parser("export-words", help="word2vec text source -> EMB1 table")
    p_words.add_argument("--source", required=True, help="word2vec text file (.txt or .txt.gz)")
    p_words.add_argument("--out", required=True, help="EMB1 output path")
    vocab_source = p_words.add_mutually_exclusive_group(required=True)
    vocab_source.add_argument("--vocab-file", help="one token per line")
    vocab_source.add_argument("--corpus", help="draw the vocabulary from a JSONL corpus")

    p_docs = commands.add_parser("export-docs", help="corpus -> per-record document vectors (EMB1)")
    p_docs.add_argument("--corpus", required=True)
    p_docs.add_argument("--out", required=True)
    p_docs.add_argument(
        "--word-source",
        required=True,
        help="word vectors (EMB1 or word2vec text) for the mean-of-words vectorizer",
    )
    p_docs.add_argument(
        "--doc2vec-model",
        help="pretrained gensim Doc2Vec model; overrides the mean-of-words vectorizer",
    )

    p_images = commands.add_parser("export-images", help="images -> FTB1 feature bank")
    p_images.add_argument("--out", required=True)
    image_source = p_images.add_mutually_exclusive_group(required=True)
    image_source.add_argument("--images-dir", help="ids are the file names, sorted")
    image_source.add_argument("--image-list", help="tab-separated id<TAB>path lines")
    p_images.add_argument("--vgg19-weights", help="torchvision VGG-19 state dict for real FC7 features")
    p_images.add_argument("--seed", type=int, default=0, help="seed for the projection extractor")

    p_syn = commands.add_parser("gen-synthetic", help="write a separable synthetic corpus + features")
    p_syn.add_argument("--out-dir", required=True)
    p_syn.add_argument("--n", type=int, default=64)
    p_syn.add_argument("--clickbait-fraction", type=float, default=0.5)
    p_syn.add_argument("--seed", type=int, default=0)

    return parser


def _corpus_vocab(corpus_path) -> list[str]:
    entries, _ = read_corpus(corpus_path)
    seen: dict[str, None] = {}
    for entry in entries:
        for text in (entry.title_text, entry.description_text):
            for token in tokenize(text):
                seen.setdefault(token, None)
    return list(seen)


def cmd_export_words(args) -> int:
    if args.vocab_file:
        vocab = words.read_vocab_file(args.vocab_file)
    else:
        vocab = _corpus_vocab(args.corpus)
    manifest = words.export_word_vectors(args.source, vocab, args.out)
    return _finish(manifest, args.out)


def cmd_export_docs(args) -> int:
    if args.doc2vec_model:
        vectorizer = docs.doc2vec_vectorizer(args.doc2vec_model)
    else:
        vectorizer = docs.mean_word_vectorizer(docs.load_word_source(args.word_source))
    manifest = docs.export_doc_vectors(args.corpus, args.out, vectorizer)
    return _finish(manifest, args.out)


def cmd_export_images(args) -> int:
    if args.images_dir:
        pairs = images.collect_images(args.images_dir)
    else:
        pairs = images.read_image_list(args.image_list)
    if args.vgg19_weights:
        extractor = images.vgg19_fc7_extractor(args.vgg19_weights)
    else:
        extractor = images.projection_extractor(args.seed)
    manifest = images.export_image_features(pairs, args.out, extractor)
    return _finish(manifest, args.out)


def cmd_gen_synthetic(args) -> int:
    paths, manifest = synthetic.gen_synthetic_corpus(
        args.n, args.clickbait_fraction, args.seed, args.out_dir
    )
    for out in manifest.outputs:
        print(f"wrote {out.path} ({out.count} entries)")
    print(f"manifest written to {paths.manifest}")
    return 0


def _finish(manifest, out_path) -> int:
    manifest_path = default_manifest_path(out_path)
    manifest.save(manifest_path)
    for warning in manifest.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    for out in manifest.outputs:
        print(f"wrote {out.path} ({out.count} entries, sha256 {out.sha256[:12]}...)")
    print(f"manifest written to {manifest_path}")
    return 0


_COMMANDS = {
    "export-words": cmd_export_words,
    "export-docs": cmd_export_docs,
    "export-images": cmd_export_images,
    "gen-synthetic": cmd_gen_synthetic,
}


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
