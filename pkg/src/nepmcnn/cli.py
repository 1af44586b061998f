"""Command-line entry point.

Subcommands: featurize, train, evaluate, predict, compare-baselines and
make-synthetic. Settings come from a JSON config (``--config``); flags
override individual keys. Exit codes: 0 success, 2 config error, 3 data
error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .corpus import CLASS_NAMES, DatasetError
from .features import EmbeddingFormatError
from .mcnn import FusionMode
from .nn import ShapeError
from .pipeline import ConfigError, DataError, NumericError, Run, RunConfig, predict_texts

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

# flag -> (config key, type); train.* keys land in the nested TrainConfig
_OVERRIDES = {
    "dataset": ("dataset", str),
    "embeddings": ("embeddings", str),
    "output": ("output", str),
    "stopwords": ("stopwords", str),
    "suffixes": ("suffixes", str),
    "text_column": ("text_column", str),
    "label_column": ("label_column", str),
    "embedding_dim": ("embedding_dim", int),
    "bow_size": ("bow_size", int),
    "alpha": ("alpha", float),
    "fusion": ("fusion", str),
    "n_folds": ("n_folds", int),
    "ratio": ("ratio", float),
    "seed": ("seed", int),
    "jobs": ("jobs", int),
    "lr": ("train.learning_rate", float),
    "batch_size": ("train.batch_size", int),
    "epochs": ("train.epochs", int),
    "joint_epochs": ("train.joint_epochs", int),
}


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run configuration")
    for flag, (_, typ) in _OVERRIDES.items():
        kwargs = {"type": typ, "default": None}
        if flag == "fusion":
            kwargs["choices"] = [m.value for m in FusionMode]
        p.add_argument("--" + flag.replace("_", "-"), **kwargs)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nepmcnn", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_ in [
        ("featurize", "fit feature models and write per-fold feature matrices"),
        ("train", "train the four-channel CNN on every fold"),
        ("evaluate", "score every fold and aggregate with confidence intervals"),
    ]:
        _add_run_flags(sub.add_parser(name, help=help_))

    p = sub.add_parser("compare-baselines", help="naive Bayes, k-NN and logistic regression per fold")
    _add_run_flags(p)
    p.add_argument("--features", choices=["ft", "bow", "ds", "hybrid"], default=None)

    p = sub.add_parser("predict", help="classify one tweet per line with a trained fold")
    p.add_argument("--model", required=True, help="fold directory of a finished run, e.g. runs/x/fold_00")
    p.add_argument("--input", required=True, help="UTF-8 text file, one tweet per line")
    p.add_argument("--out", default="-", help="output TSV (default stdout)")

    p = sub.add_parser("make-synthetic", help="write a synthetic corpus and embedding file")
    p.add_argument("directory")
    p.add_argument("--n-per-class", type=int, default=400)
    p.add_argument("--seed", type=int, default=0)
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    base = {}
    base_dir = None
    if args.config:
        path = Path(args.config)
        try:
            base = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
        if not isinstance(base, dict):
            raise ConfigError(f"{path}: top level must be an object")
        base_dir = path.parent
    cfg = RunConfig.from_dict(base, base_dir)
    train_updates = {}
    updates = {}
    for flag, (key, _) in _OVERRIDES.items():
        value = getattr(args, flag, None)
        if value is None:
            continue
        if key.startswith("train."):
            train_updates[key[len("train."):]] = value
        else:
            updates[key] = value
    if train_updates:
        try:
            updates["train"] = dataclasses.replace(cfg.train, **train_updates)
        except ValueError as exc:
            raise ConfigError(f"train: {exc}") from None
    cfg = dataclasses.replace(cfg, **updates)
    cfg.validate()
    return cfg


def _predict(args) -> int:
    src = Path(args.input)
    if not src.is_file():
        raise ConfigError(f"input file not found: {src}")
    if not (Path(args.model) / "model" / "manifest.json").is_file():
        raise ConfigError(f"no trained model under {args.model}")
    texts = [line.rstrip("\n") for line in src.read_text(encoding="utf-8").splitlines()]
    results = predict_texts(args.model, texts)
    lines = [f"{CLASS_NAMES[c]}\t" + "\t".join(f"{s:.6f}" for s in scores) + "\n" for c, scores in results]
    if args.out == "-":
        sys.stdout.writelines(lines)
    else:
        Path(args.out).write_text("".join(lines), encoding="utf-8")
    return EXIT_OK


def _make_synthetic(args) -> int:
    from .preprocess import load_config
    from .synthetic import SyntheticSpec, write_synthetic

    paths = write_synthetic(args.directory, SyntheticSpec(n_per_class=args.n_per_class, seed=args.seed),
                            load_config())
    for name, path in paths.items():
        print(f"{name}: {path}")
    return EXIT_OK


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "predict":
        return _predict(args)
    if args.command == "make-synthetic":
        return _make_synthetic(args)

    cfg = resolve_config(args)
    r = Run(cfg)
    if args.command == "featurize":
        r.featurize()
    elif args.command == "train":
        r.train()
    elif args.command == "evaluate":
        agg = r.evaluate()
        if hasattr(agg, "summary"):
            for metric, iv in agg.summary.items():
                print(f"{metric:9s} mean={iv.mean:.4f} ci95=[{iv.low:.4f}, {iv.high:.4f}]")
    elif args.command == "compare-baselines":
        doc = r.compare_baselines(args.features)
        for name, rep in doc["baselines"].items():
            acc = rep["summary"]["accuracy"]["mean"] if "summary" in rep else rep["fold_0"]["accuracy"]
            print(f"{name:20s} {doc['features']:6s} accuracy={acc:.4f}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    try:
        return run(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, DatasetError, EmbeddingFormatError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ShapeError as exc:
        print(f"data error: dimension mismatch: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
