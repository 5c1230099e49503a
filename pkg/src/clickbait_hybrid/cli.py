"""Command-line interface: train, evaluate, predict, gradcheck."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict

from . import data_io, gradcheck
from .model import FeatureTables
from .training import TrainConfig, train


def _add_data_flags(parser: argparse.ArgumentParser, with_images: bool = True) -> None:
    parser.add_argument("--corpus", required=True, help="JSONL corpus path")
    parser.add_argument("--word-emb", required=True, help="EMB1 word vector table")
    parser.add_argument("--doc-emb", required=True, help="EMB1 document vector table")
    if with_images:
        parser.add_argument("--image-bank", help="FTB1 image feature bank (optional)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clickbait-hybrid")
    commands = parser.add_subparsers(dest="command", required=True)

    p_train = commands.add_parser("train", help="train a model and write a checkpoint")
    _add_data_flags(p_train)
    p_train.add_argument("--out", required=True, help="checkpoint output path")
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--batch-size", type=int, default=256)
    p_train.add_argument("--epochs", type=int, default=50)
    p_train.add_argument("--threshold", type=float, default=0.5)
    p_train.add_argument(
        "--target-train-accuracy",
        type=float,
        help="stop once training accuracy reaches this value",
    )

    p_eval = commands.add_parser("evaluate", help="score a corpus against a checkpoint")
    _add_data_flags(p_eval)
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--threshold", type=float, help="defaults to the checkpoint's threshold")
    p_eval.add_argument("--out", help="also write the JSON report here")

    p_pred = commands.add_parser("predict", help="print id<TAB>probability per record")
    _add_data_flags(p_pred)
    p_pred.add_argument("--checkpoint", required=True)
    p_pred.add_argument("--out", help="write lines here instead of stdout")

    p_grad = commands.add_parser("gradcheck", help="finite-difference check of all gradients")
    p_grad.add_argument("--seed", type=int, default=0)
    return parser


def _load_tables(args) -> FeatureTables:
    word = data_io.read_embedding_file(args.word_emb)
    doc = data_io.read_embedding_file(args.doc_emb)
    images = None
    if getattr(args, "image_bank", None):
        images = data_io.read_feature_bank(args.image_bank)
    return FeatureTables(word=word, doc=doc, images=images)


def _load_corpus(args) -> list:
    parsed = data_io.parse_corpus(args.corpus)
    if parsed.errors:
        print(f"note: skipped {len(parsed.errors)} invalid corpus lines", file=sys.stderr)
        for error in parsed.errors[:10]:
            print(f"  line {error.line}: {error.reason}", file=sys.stderr)
    if not parsed.records:
        raise ValueError(f"{args.corpus}: no valid records")
    return parsed.records


def _warn_missing_images(records, tables: FeatureTables) -> None:
    missing = data_io.missing_feature_ids(records, tables.images)
    if missing:
        print(f"note: {len(missing)} image ids not present in the bank", file=sys.stderr)


def _predictions(params, records, tables) -> list[float]:
    from . import tensor as tc
    from .model import forward

    with tc.no_grad():
        return [forward(params, record, tables).item() for record in records]


def cmd_train(args) -> int:
    records = _load_corpus(args)
    tables = _load_tables(args)
    _warn_missing_images(records, tables)
    config = TrainConfig(
        batch_size=args.batch_size,
        seed=args.seed,
        max_epochs=args.epochs,
        threshold=args.threshold,
        stop_at_train_accuracy=args.target_train_accuracy,
    )
    result = train(config, records, tables)
    for stats in result.trace:
        print(
            f"epoch {stats.epoch:3d}  loss {stats.train_loss:.6f}  "
            f"train_acc {stats.train_accuracy:.4f}  val_f1 {stats.val_f1:.4f}  "
            f"val_acc {stats.val_accuracy:.4f}"
        )
    hyper = {
        "seed": args.seed,
        "batch_size": args.batch_size,
        "epochs": args.epochs,
        "threshold": args.threshold,
    }
    data_io.save_checkpoint(args.out, result.best_params, hyper, result.title_cap)
    trace_path = args.out + ".trace.json"
    with open(trace_path, "w", encoding="utf-8") as handle:
        json.dump([asdict(stats) for stats in result.trace], handle, indent=2)
    print(f"checkpoint (best epoch {result.best_epoch}) written to {args.out}")
    print(f"trace written to {trace_path}")
    return 0


def cmd_evaluate(args) -> int:
    from .metrics import compute_metrics

    checkpoint = data_io.load_checkpoint(args.checkpoint)
    records = _load_corpus(args)
    tables = _load_tables(args)
    _warn_missing_images(records, tables)
    threshold = args.threshold
    if threshold is None:
        threshold = checkpoint.config.get("threshold", 0.5)
    preds = _predictions(checkpoint.params, records, tables)
    report = compute_metrics(preds, [r.label for r in records], threshold)
    print(report.to_text())
    payload = json.dumps(report.to_dict(), indent=2)
    print(payload)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            handle.write(payload + "\n")
    return 0


def cmd_predict(args) -> int:
    checkpoint = data_io.load_checkpoint(args.checkpoint)
    records = _load_corpus(args)
    tables = _load_tables(args)
    _warn_missing_images(records, tables)
    preds = _predictions(checkpoint.params, records, tables)
    lines = [f"{record.id}\t{p:.6f}" for record, p in zip(records, preds)]
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_gradcheck(args) -> int:
    report = gradcheck.run_full_suite(seed=args.seed)
    print(report.format())
    if report.ok:
        print("gradcheck passed")
        return 0
    print("gradcheck FAILED", file=sys.stderr)
    return 1


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {
        "train": cmd_train,
        "evaluate": cmd_evaluate,
        "predict": cmd_predict,
        "gradcheck": cmd_gradcheck,
    }[args.command]
    try:
        return handler(args)
    except (OSError, ValueError) as exc:  # covers file, format, and dimension errors
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
