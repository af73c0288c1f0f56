"""Command-line entry point: encode, train, eval, ablate, render.

Exit codes: 0 success, 2 usage, 3 dataset, 4 file I/O, 5 configuration,
6 numerical failure, 7 incompatible checkpoint/archive.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import archive, render
from . import config as config_mod
from .config import RunConfig
from .dataset import ClassLabel, SignalInstance, load_dataset, load_record, window_signal
from .errors import ConfigError, GrcNetError, IncompatibleCheckpoint, WriteError
from .nn import checkpoint
from .pipeline import EncodedSet, build_sets, encode_instances
from .synthetic import synthetic_records
from .train_eval import (
    REFERENCE_PERCENT,
    ablate,
    ablation_report,
    evaluate,
    format_metrics_table,
    train,
)

log = logging.getLogger("grcnet")

TRAIN_ARCHIVE = "train.gaf"
TEST_ARCHIVE = "test.gaf"
CHECKPOINT = "checkpoint.grc"
CONFIG_ECHO = "config.txt"


def _write_text(path: Path, text: str) -> None:
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise WriteError(path, exc.strerror or "cannot write") from exc


def _write_json(path: Path, obj) -> None:
    _write_text(path, json.dumps(obj, indent=2, sort_keys=False) + "\n")


def _prepare_out(cfg: RunConfig) -> Path:
    out = cfg.out
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise WriteError(out, exc.strerror or "cannot create directory") from exc
    _write_text(out / CONFIG_ECHO, config_mod.dumps(cfg))
    return out


def _records(cfg: RunConfig):
    if cfg.source == "synthetic":
        return synthetic_records(
            cfg.synthetic_records_per_class, cfg.synthetic_length, cfg.synthetic_noise, cfg.seed,
            window_len=cfg.window_len,
        )
    if not cfg.dataset_root:
        raise ConfigError("dataset_root is required when source = bonn")
    return load_dataset(cfg.dataset_root)


def _resolve(args) -> RunConfig:
    overrides = {}
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    if args.out is not None:
        overrides["output_dir"] = args.out
    for flag, key in (("epochs", "train.epochs"), ("batch_size", "train.batch_size"),
                      ("lr", "train.learning_rate")):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = str(value)
    return config_mod.load(args.config, overrides)


# commands ------------------------------------------------------------------------


def encode_to(cfg: RunConfig, out: Path) -> dict:
    train_set, test_set, summary = build_sets(_records(cfg), cfg.split, cfg.paa_target)
    archive.write(out / TRAIN_ARCHIVE, train_set)
    archive.write(out / TEST_ARCHIVE, test_set)
    report = summary.to_dict()
    report["image_size"] = cfg.paa_target
    _write_json(out / "encode_summary.json", report)
    return report


def cmd_encode(args) -> int:
    cfg = _resolve(args)
    out = _prepare_out(cfg)
    report = encode_to(cfg, out)
    print(f"{'class':<6}{'train':>8}{'test':>8}")
    for label in ClassLabel:
        print(f"{label.name:<6}{report['train'][label.name]:>8}{report['test'][label.name]:>8}")
    skipped = report["skipped_degenerate"]
    print(f"skipped constant windows: train {skipped['train']}, test {skipped['test']}")
    print(f"archives written to {out}")
    return 0


def _history_doc(variant: str, history, metrics=None) -> dict:
    doc = {"variant": variant, "epochs": history.to_dict() if history else []}
    if metrics is not None:
        doc.update(metrics.to_dict())
    return doc


def cmd_train(args) -> int:
    cfg = _resolve(args)
    out = _prepare_out(cfg)
    train_path = Path(args.train_archive) if args.train_archive else out / TRAIN_ARCHIVE
    test_path = Path(args.test_archive) if args.test_archive else out / TEST_ARCHIVE
    if not args.train_archive and not train_path.exists():
        log.info("no archives in %s; encoding first", out)
        encode_to(cfg, out)
    train_set = archive.read(train_path)
    test_set = archive.read(test_path) if (args.test_archive or test_path.exists()) else None
    if train_set.image_size != cfg.paa_target:
        raise IncompatibleCheckpoint(
            f"archive images are {train_set.image_size}px, config expects {cfg.paa_target}px"
        )
    model, history = train(cfg.model, cfg.train, train_set, test_set)
    checkpoint.save(out / CHECKPOINT, model)
    metrics = evaluate(model, test_set) if test_set is not None and len(test_set) else None
    _write_json(out / "history.json", _history_doc(cfg.train.variant, history, metrics))
    _write_json(out / "timing.json", {"wall_seconds": history.wall_seconds})
    if metrics is not None:
        print(format_metrics_table([(cfg.train.variant, metrics)]))
    print(f"checkpoint written to {out / CHECKPOINT}")
    return 0


def cmd_eval(args) -> int:
    model = checkpoint.load(args.checkpoint, dtype=np.float32)
    data = archive.read(args.archive)
    expected = tuple(model.cfg.input_size[:2])
    if len(data) and data.images.shape[1:3] != expected:
        raise IncompatibleCheckpoint(
            f"checkpoint expects {expected[0]}x{expected[1]} images, "
            f"archive holds {data.image_size}x{data.image_size}"
        )
    metrics = evaluate(model, data)
    print(format_metrics_table([(args.variant, metrics)], reference=True))
    print("confusion (rows = true Z O N F S, columns = predicted):")
    for label, row in zip(ClassLabel, metrics.confusion[: len(ClassLabel)]):
        print(f"  {label.name} " + " ".join(f"{int(v):6d}" for v in row))
    out = Path(args.out) if args.out else Path(args.checkpoint).parent
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise WriteError(out, exc.strerror or "cannot create directory") from exc
    _write_json(out / "metrics.json", _history_doc(args.variant, None, metrics))
    return 0


def cmd_ablate(args) -> int:
    cfg = _resolve(args)
    out = _prepare_out(cfg)
    rows = ablate(cfg.model, cfg.train, _records(cfg), cfg.split, cfg.paa_target)
    table = format_metrics_table([(r.variant, r.metrics) for r in rows], reference=True)
    report = ablation_report(rows)
    report["table_percent"] = [
        {
            "variant": r.variant,
            "recall": round(100 * r.metrics.macro_recall, 2),
            "accuracy": round(100 * r.metrics.accuracy, 2),
            "precision": round(100 * r.metrics.macro_precision, 2),
            "f1": round(100 * r.metrics.macro_f1, 2),
            "reference_accuracy": REFERENCE_PERCENT[r.variant][1],
        }
        for r in rows
    ]
    _write_json(out / "ablation.json", report)
    _write_text(out / "ablation.txt", table + "\n")
    print(table)
    return 0


def _render_set(data: EncodedSet, out: Path, limit: int | None, palette: str) -> int:
    n = len(data) if limit is None else min(limit, len(data))
    for i in range(n):
        name = render.image_filename(
            data.record_ids[i], int(data.offsets[i]), ClassLabel(int(data.labels[i])).name
        )
        render.write_png(out / name, data.images[i], palette)
    return n


def cmd_render(args) -> int:
    out = Path(args.out or "renders")
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise WriteError(out, exc.strerror or "cannot create directory") from exc
    if args.archive:
        data = archive.read(args.archive)
    else:
        cfg = _resolve(args)
        record = load_record(args.record, args.label)
        instances: list[SignalInstance] = window_signal(record, cfg.window_len, cfg.stride)
        data, _ = encode_instances(instances, cfg.paa_target)
    count = _render_set(data, out, args.limit, args.palette)
    print(f"wrote {count} image(s) to {out}")
    return 0


# parser --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration file (key = value)")
    common.add_argument("--seed", type=int, help="override the global seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override any configuration key; repeatable")
    common.add_argument("-v", "--verbose", action="store_true")

    budget = argparse.ArgumentParser(add_help=False)
    budget.add_argument("--epochs", type=int)
    budget.add_argument("--batch-size", dest="batch_size", type=int)
    budget.add_argument("--lr", type=float)

    parser = argparse.ArgumentParser(prog="grcnet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", parents=[common], help="window, encode and archive a dataset")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("train", parents=[common, budget], help="train and write a checkpoint")
    p.add_argument("--train-archive", dest="train_archive")
    p.add_argument("--test-archive", dest="test_archive")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint on an archive")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--archive", required=True)
    p.add_argument("--variant", default="full", help="label for the metrics row")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", parents=[common, budget], help="run the four-variant ablation")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("render", parents=[common], help="write PNG heatmaps")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--archive")
    src.add_argument("--record", help="single ASCII record; windowed and encoded per config")
    p.add_argument("--label", default="Z", help="class tag of --record")
    p.add_argument("--limit", type=int)
    p.add_argument("--palette", choices=render.PALETTES, default="gray")
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except GrcNetError as exc:
        print(f"grcnet {args.command}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        # label parsing and similar argument-level problems
        print(f"grcnet {args.command}: error: {exc}", file=sys.stderr)
        return ConfigError.exit_code


if __name__ == "__main__":
    sys.exit(main())
