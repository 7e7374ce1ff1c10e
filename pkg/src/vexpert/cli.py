#!/usr/bin/env python
"""
Command-line entry point for vexpert.

Usage: vexpert [-h] [--version] [-v] {synth,compress,train,eval,diagnose} ...

Examples:
    vexpert synth --size 200 --seed 1 --out data/            # synthetic dataset
    vexpert compress --features v.feat --out c/                # S-tokens + trace
    vexpert train --dataset data/dataset.jsonl --out run/      # train, checkpoint per epoch
    vexpert eval --checkpoint run/checkpoints/epoch-004 --dataset data/dataset.jsonl --task tg --out ev/
    vexpert diagnose --checkpoint run/checkpoints/epoch-004 --dataset data/dataset.jsonl --out diag/
    vexpert train --dump-config                                # print the default config

Copyright (C) 2026 Free & Fair
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import tomllib
from pathlib import Path
from typing import Any, Optional, Sequence

from pydantic import ValidationError

from . import __version__
from .errors import ConfigError, DataError, VexpertError
from .schema.types import EvalTask, Perturbation, RunConfig, TrainExample

logger = logging.getLogger("vexpert")

EFFECTIVE_CONFIG = "effective-config.json"
MANIFEST = "manifest.json"
DATASET_FILE = "dataset.jsonl"


# =============================================================================
# Configuration
# =============================================================================

def _merge(base: dict[str, Any], update: dict[str, Any], path: str = "") -> dict[str, Any]:
    out = dict(base)
    for key, value in update.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict) and isinstance(value, dict) and base[key]:
            out[key] = _merge(base[key], value, where + ".")
        else:
            out[key] = value
    return out


def parse_override(item: str) -> dict[str, Any]:
    """'backbone.adapter.alpha_split=0.25' -> {'backbone': {'adapter': {'alpha_split': 0.25}}}"""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not key=value")
    key, raw = item.split("=", 1)
    try:
        value: Any = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    nested: dict[str, Any] = {}
    cursor = nested
    parts = key.strip().split(".")
    for part in parts[:-1]:
        cursor = cursor.setdefault(part, {})
    cursor[parts[-1]] = value
    return nested


def compress_overrides(args: argparse.Namespace) -> list[str]:
    """--u/--k/--c/--tau as compress.* overrides; they win over --set."""
    return [
        f"compress.{name}={value}"
        for name in ("u", "k", "c", "tau")
        if (value := getattr(args, name, None)) is not None
    ]


def read_config_file(path: Path) -> dict[str, Any]:
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        if path.suffix == ".toml":
            return tomllib.loads(path.read_text(encoding="utf-8"))
        return json.loads(path.read_text(encoding="utf-8"))
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def load_config(path: Optional[Path] = None, overrides: Sequence[str] = (), seed: Optional[int] = None) -> RunConfig:
    """defaults < file < --set overrides < --seed."""
    data = RunConfig().model_dump(mode="json")
    if path is not None:
        data = _merge(data, read_config_file(path))
    for item in overrides:
        data = _merge(data, parse_override(item))
    if seed is not None:
        data["seed"] = seed
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(str(exc).replace("\n", " ")) from exc


# =============================================================================
# Reproducibility
# =============================================================================

def content_hash(path: Path) -> str:
    """Git-style blob hash of a file; for a directory, a hash over its sorted file hashes."""
    if path.is_dir():
        listing = "".join(
            f"{p.relative_to(path).as_posix()} {content_hash(p)}\n"
            for p in sorted(path.rglob("*")) if p.is_file()
        )
        return hashlib.sha1(listing.encode("utf-8")).hexdigest()
    data = path.read_bytes()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def write_run_files(out: Path, config: RunConfig, command: str, inputs: Sequence[Path],
                    outputs: Sequence[Path] = ()) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / EFFECTIVE_CONFIG).write_text(config.model_dump_json(indent=2), encoding="utf-8")
    manifest = {
        "command": command,
        "version": __version__,
        "seed": config.seed,
        "config": content_hash(out / EFFECTIVE_CONFIG),
        "inputs": {str(p): content_hash(p) for p in inputs if p.exists()},
        "outputs": {p.name: content_hash(p) for p in outputs if p.exists()},
    }
    (out / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# =============================================================================
# Commands
# =============================================================================

def _dataset_path(args: argparse.Namespace, config: RunConfig) -> Path:
    raw = args.dataset or config.dataset
    if raw is None:
        raise DataError("no dataset given (use --dataset or the 'dataset' config key)")
    path = Path(raw)
    if not path.exists():
        raise DataError(f"dataset not found: {path}")
    return path


def _split(examples: list[TrainExample], split: str) -> list[TrainExample]:
    if split == "all":
        return examples
    chosen = [ex for ex in examples if ex.split == split]
    if not chosen:
        raise DataError(f"no examples in split {split!r} (use --split all)")
    return chosen


def run_synth(args: argparse.Namespace, config: RunConfig) -> int:
    from .training.synth import save_dataset, synth_dataset

    out = Path(args.out)
    dataset = save_dataset(synth_dataset(args.size, config.synth, seed=config.seed), out / DATASET_FILE)
    write_run_files(out, config, "synth", [], [dataset])
    print(f"wrote {args.size} examples to {dataset} ({content_hash(dataset)})")
    return 0


def run_compress(args: argparse.Namespace, config: RunConfig) -> int:
    from .evaluation.report import compress_tree
    from .training.synth import load_dataset, load_example_features
    from .video.compress import compress, save_s_tokens
    from .video.frontend import load_features

    out = Path(args.out)
    if args.features:
        source = Path(args.features)
        features = load_features(source)
    else:
        source = _dataset_path(args, config)
        examples = load_dataset(source)
        if not 0 <= args.index < len(examples):
            raise DataError(f"--index {args.index} outside dataset of {len(examples)}")
        features = load_example_features(examples[args.index], base_dir=source.parent)
    s_tokens, trace = compress(features, config.compress)
    out.mkdir(parents=True, exist_ok=True)
    save_s_tokens(s_tokens, out / "s_tokens.feat")
    (out / "trace.json").write_text(json.dumps(trace.summary(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    write_run_files(out, config, "compress", [source], [out / "s_tokens.feat", out / "trace.json"])
    print(compress_tree(trace))
    return 0


def run_train(args: argparse.Namespace, config: RunConfig) -> int:
    from .training.synth import load_dataset
    from .training.trainer import Trainer

    dataset = _dataset_path(args, config)
    examples = load_dataset(dataset)
    split = None if args.split == "all" else args.split
    out = Path(args.out)
    if args.resume:
        trainer = Trainer.resume(Path(args.resume), examples, out, base_dir=dataset.parent, split=split)
        config = trainer.config
    else:
        trainer = Trainer(config, examples, out, base_dir=dataset.parent, split=split)
    result = trainer.train()
    write_run_files(out, config, "train", [dataset], [result.metrics])
    print(f"trained {result.steps} steps; checkpoint {result.checkpoint}")
    print(json.dumps(result.last, sort_keys=True))
    return 0


def run_eval(args: argparse.Namespace, config: RunConfig) -> int:
    from .evaluation.report import metrics_table, write_report
    from .evaluation.runner import Evaluator
    from .model.checkpoint import load_checkpoint
    from .training.synth import load_dataset

    checkpoint = Path(args.checkpoint)
    expert = load_checkpoint(checkpoint)
    dataset = _dataset_path(args, config)
    examples = _split(load_dataset(dataset), args.split)
    report = Evaluator(expert, base_dir=dataset.parent, seed=config.seed).run(
        examples, EvalTask(args.task), Perturbation(args.perturb), checkpoint=checkpoint.name,
    )
    out = Path(args.out)
    written = write_report(report, out)
    write_run_files(out, config, "eval", [checkpoint, dataset], written)
    print(metrics_table(report))
    return 0


def run_diagnose(args: argparse.Namespace, config: RunConfig) -> int:
    from .evaluation.diagnostic import bias_diagnostic
    from .evaluation.report import EvalReport, metrics_table, write_report
    from .evaluation.runner import eligible
    from .model.checkpoint import load_checkpoint
    from .training.synth import load_dataset, load_example_features

    checkpoint = Path(args.checkpoint)
    expert = load_checkpoint(checkpoint)
    dataset = _dataset_path(args, config)
    examples = eligible(_split(load_dataset(dataset), args.split), EvalTask.TG)
    samples = [
        (load_example_features(ex, expert.config.n_frames, dataset.parent), ex.prompt) for ex in examples
    ]
    diagnostic = bias_diagnostic(expert.as_grounder(), samples, seed=config.seed)
    report = EvalReport(task=EvalTask.TG, checkpoint=checkpoint.name, n_samples=len(samples), diagnostic=diagnostic)
    out = Path(args.out)
    written = write_report(report, out)
    write_run_files(out, config, "diagnose", [checkpoint, dataset], written)
    print(metrics_table(report))
    return 0


COMMANDS = {
    "synth": run_synth,
    "compress": run_compress,
    "train": run_train,
    "eval": run_eval,
    "diagnose": run_diagnose,
}


# =============================================================================
# Parser
# =============================================================================

def _common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", type=Path, help="JSON or TOML run configuration")
    sub.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                     help="Override a config value by dotted key (repeatable)")
    sub.add_argument("--seed", type=int, help="Override the run seed")
    sub.add_argument("--dump-config", action="store_true", help="Print the effective config as JSON and exit")
    sub.add_argument("--out", help="Output directory (required unless --dump-config)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vexpert",
        description="Train and evaluate a video temporal expert on frame features.",
        epilog="""
Examples:
    %(prog)s synth --size 100 --seed 1 --out data/
    %(prog)s compress --dataset data/dataset.jsonl --index 0 --out c/
    %(prog)s compress --dataset data/dataset.jsonl --u 2 --k 32 --c 8 --tau 0.9 --out c2/
    %(prog)s train --dataset data/dataset.jsonl --set epochs=2 --out run/
    %(prog)s eval --checkpoint run/checkpoints/epoch-001 --dataset data/dataset.jsonl --task tg --out ev/
    %(prog)s eval --checkpoint run/checkpoints/epoch-001 --dataset data/dataset.jsonl --perturb shuffle --out ev2/
    %(prog)s diagnose --checkpoint run/checkpoints/epoch-001 --dataset data/dataset.jsonl --out diag/
        """,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    subs = parser.add_subparsers(dest="command", required=True)

    synth = subs.add_parser("synth", help="Generate a synthetic dataset")
    _common(synth)
    synth.add_argument("--size", type=int, default=100, help="Number of examples")

    comp = subs.add_parser("compress", help="Run Spatial Compress on one video")
    _common(comp)
    comp.add_argument("--features", help="Feature container file")
    comp.add_argument("--dataset", help="Dataset JSON-lines file (with --index)")
    comp.add_argument("--index", type=int, default=0, help="Example index in --dataset")
    comp.add_argument("--u", type=int, help="Number of GOPs (compress.u)")
    comp.add_argument("--k", type=int, help="Key tokens per IDR frame (compress.k)")
    comp.add_argument("--c", type=int, help="Context tokens per IDR frame (compress.c)")
    comp.add_argument("--tau", type=float, help="Cosine cutoff for GOP boundary expansion (compress.tau)")

    train = subs.add_parser("train", help="Train adapters, <LOC> and the temporal head")
    _common(train)
    train.add_argument("--dataset", help="Dataset JSON-lines file")
    train.add_argument("--split", default="train", help="Split to train on ('all' for every example)")
    train.add_argument("--resume", help="Checkpoint directory to resume from")

    ev = subs.add_parser("eval", help="Evaluate a checkpoint")
    _common(ev)
    ev.add_argument("--checkpoint", required=False, help="Checkpoint directory")
    ev.add_argument("--dataset", help="Dataset JSON-lines file")
    ev.add_argument("--task", choices=[t.value for t in EvalTask], default=EvalTask.TG.value)
    ev.add_argument("--perturb", choices=[p.value for p in Perturbation], default=Perturbation.NONE.value)
    ev.add_argument("--split", default="test", help="Split to evaluate ('all' for every example)")

    diag = subs.add_parser("diagnose", help="Language-bias diagnostic")
    _common(diag)
    diag.add_argument("--checkpoint", required=False, help="Checkpoint directory")
    diag.add_argument("--dataset", help="Dataset JSON-lines file")
    diag.add_argument("--split", default="test", help="Split to diagnose ('all' for every example)")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        config = load_config(args.config, [*args.overrides, *compress_overrides(args)], args.seed)
        if args.dump_config:
            print(config.model_dump_json(indent=2))
            return 0
        if not args.out:
            raise ConfigError("--out is required")
        if args.command in ("eval", "diagnose") and not args.checkpoint:
            raise ConfigError("--checkpoint is required")
        if args.command == "compress" and not (args.features or args.dataset):
            raise ConfigError("compress needs --features or --dataset")
        return COMMANDS[args.command](args, config)
    except ConfigError as exc:
        print(f"error: {exc.category}: {exc}", file=sys.stderr)
        return 2
    except VexpertError as exc:
        print(f"error: {exc.category}: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        logger.debug("unexpected failure", exc_info=True)
        print(f"error: runtime: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
