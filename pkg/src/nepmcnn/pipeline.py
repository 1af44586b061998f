"""End-to-end experiment stages: featurize, train, evaluate, compare baselines,
predict.

Run directory layout::

    <output>/manifest.json         config, config hash, seeds, library versions
    <output>/split_plan.json
    <output>/fold_NN/feature_model.json
    <output>/fold_NN/features.npz  X_train, y_train, X_test, y_test (hybrid)
    <output>/fold_NN/model/        MCNN bundle (4 channel files + manifest)
    <output>/fold_NN/metrics.json
    <output>/report.json, folds.csv
    <output>/baselines_<kind>.json, baselines_<kind>_folds.csv

Seeds: fold ``i`` of the split uses ``seed + i``. Every other random stage
draws from ``derive_seed(seed, stage, fold, index)``, a SeedSequence over that
4-tuple, with stage 1 = channel initialization (index = kernel size) and
stage 2 = training shuffles and dropout (index 0). Any stage of any fold can
therefore be re-run in isolation.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .baselines import DEFAULT_HYPER, KINDS, predict_baseline_batch, train_baseline
from .corpus import CLASS_NAMES, DatasetError, load_dataset, stratified_splits
from .evaluation import aggregate, evaluate_predictions, write_folds_csv, write_report
from .features import (
    FEATURE_KINDS,
    EmbeddingFormatError,
    FeatureModel,
    featurize,
    file_sha256,
    fit_feature_model,
    load_embeddings,
    select_block,
)
from .mcnn import (
    KERNEL_SIZES,
    FusionMode,
    TrainConfig,
    channel_probs,
    decide,
    fuse,
    load_bundle,
    predict_batch,
    save_bundle,
    train_mcnn,
)
from .preprocess import default_resource_dir, load_config, preprocess, preprocess_all

log = logging.getLogger(__name__)

STAGE_INIT = 1
STAGE_TRAIN = 2


class ConfigError(ValueError):
    exit_code = 2


class DataError(ValueError):
    exit_code = 3


class NumericError(RuntimeError):
    exit_code = 4


def derive_seed(master: int, stage: int, fold: int, index: int = 0) -> int:
    return int(np.random.SeedSequence([master, stage, fold, index]).generate_state(1)[0])


@dataclass
class RunConfig:
    dataset: str | None = None
    embeddings: str | None = None
    output: str = "runs/default"
    stopwords: str | None = None
    suffixes: str | None = None
    min_stem_length: int = 2
    text_column: str = "text"
    label_column: str = "label"
    delimiter: str | None = None
    label_map: dict[str, str] | None = None
    embedding_dim: int = 300
    bow_size: int = 100
    alpha: float = 1.0
    train: TrainConfig = field(default_factory=TrainConfig)
    fusion: str = "avg"
    n_folds: int = 10
    ratio: float = 0.7
    seed: int = 0
    jobs: int = 1
    baselines: list[str] = field(default_factory=lambda: list(KINDS))
    baseline_features: str = "hybrid"

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path | None = None) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        if "train" in d:
            tknown = {f.name for f in dataclasses.fields(TrainConfig)}
            if not isinstance(d["train"], dict) or set(d["train"]) - tknown:
                raise ConfigError(f"train section accepts only {sorted(tknown)}")
            try:
                d["train"] = TrainConfig(**d["train"])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"train: {exc}") from None
        if base_dir is not None:
            for key in ("dataset", "embeddings", "output", "stopwords", "suffixes"):
                if d.get(key) and not Path(d[key]).is_absolute():
                    d[key] = str(base_dir / d[key])
        cfg = cls(**d)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        try:
            with open(path, encoding="utf-8") as fh:
                d = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
        if not isinstance(d, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls.from_dict(d, path.parent)

    def validate(self) -> None:
        checks = [
            (self.fusion in {m.value for m in FusionMode}, f"fusion must be avg, sum or max, got {self.fusion!r}"),
            (0 < self.ratio < 1, "ratio must be in (0, 1)"),
            (self.n_folds >= 1, "n_folds must be >= 1"),
            (self.bow_size >= 1, "bow_size must be >= 1"),
            (self.alpha > 0, "alpha must be > 0"),
            (self.embedding_dim >= 1, "embedding_dim must be >= 1"),
            (self.jobs >= 1, "jobs must be >= 1"),
            (self.min_stem_length >= 1, "min_stem_length must be >= 1"),
            (self.baseline_features in FEATURE_KINDS, f"baseline_features must be one of {FEATURE_KINDS}"),
            (all(b in KINDS for b in self.baselines), f"baselines must be drawn from {KINDS}"),
            (isinstance(self.train, TrainConfig), "train must be a TrainConfig"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)

    def require_inputs(self) -> None:
        for key in ("dataset", "embeddings"):
            value = getattr(self, key)
            if not value:
                raise ConfigError(f"{key} path is required")
            if not Path(value).is_file():
                raise ConfigError(f"{key} file not found: {value}")
        for key in ("stopwords", "suffixes"):
            value = getattr(self, key)
            if value and not Path(value).is_file():
                raise ConfigError(f"{key} file not found: {value}")

    def to_dict(self) -> dict:
        return asdict(self)


def _hash(obj: Any) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str).encode()).hexdigest()


def _versions() -> dict:
    import scipy

    return {"nepmcnn": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


class Run:
    """One experiment directory plus the inputs it was configured with."""

    def __init__(self, cfg: RunConfig):
        cfg.validate()
        cfg.require_inputs()
        self.cfg = cfg
        self.out = Path(cfg.output)
        self.out.mkdir(parents=True, exist_ok=True)
        base = default_resource_dir()
        self.stopwords_path = str(cfg.stopwords or base / "stopwords.txt")
        self.suffixes_path = str(cfg.suffixes or base / "suffixes.txt")
        self.pre = load_config(self.stopwords_path, self.suffixes_path, cfg.min_stem_length)
        try:
            self.corpus = load_dataset(cfg.dataset, cfg.text_column, cfg.label_column, cfg.delimiter,
                                       cfg.label_map)
        except DatasetError as exc:
            raise DataError(str(exc)) from None
        except ValueError as exc:
            raise ConfigError(f"label_map: {exc}") from None
        self.embedding_sha = file_sha256(cfg.embeddings)
        self.feature_key = _hash({
            "dataset": file_sha256(cfg.dataset),
            "embeddings": self.embedding_sha,
            "stopwords": file_sha256(self.stopwords_path),
            "suffixes": file_sha256(self.suffixes_path),
            **{k: getattr(cfg, k) for k in ("min_stem_length", "text_column", "label_column", "label_map",
                                             "embedding_dim", "bow_size", "alpha", "n_folds", "ratio", "seed")},
        })
        self.model_key = _hash({"features": self.feature_key, "train": asdict(cfg.train), "seed": cfg.seed})
        try:
            self.plan = stratified_splits(self.corpus, cfg.ratio, cfg.n_folds, cfg.seed)
        except ValueError as exc:
            raise DataError(str(exc)) from None
        self._docs = None
        self._embeddings = None
        self._write_manifest()

    # -- shared inputs -----------------------------------------------------

    @property
    def docs(self) -> list[list[str]]:
        if self._docs is None:
            self._docs = preprocess_all(self.corpus.texts, self.pre)
        return self._docs

    @property
    def embeddings(self):
        if self._embeddings is None:
            vocab = {t for doc in self.docs for t in doc}
            try:
                self._embeddings = load_embeddings(self.cfg.embeddings, self.cfg.embedding_dim, restrict_to=vocab)
            except EmbeddingFormatError as exc:
                raise DataError(f"{self.cfg.embeddings}: {exc}") from None
        return self._embeddings

    def fold_dir(self, i: int) -> Path:
        d = self.out / f"fold_{i:02d}"
        d.mkdir(exist_ok=True)
        return d

    def seeds(self, fold: int) -> dict:
        return {
            "split": self.cfg.seed + fold,
            "channels": {k: derive_seed(self.cfg.seed, STAGE_INIT, fold, k) for k in KERNEL_SIZES},
            "train": derive_seed(self.cfg.seed, STAGE_TRAIN, fold),
        }

    def _write_manifest(self) -> None:
        manifest = {
            "config": self.cfg.to_dict(),
            "config_hash": _hash(self.cfg.to_dict()),
            "feature_key": self.feature_key,
            "model_key": self.model_key,
            "resources": {"stopwords": self.stopwords_path, "suffixes": self.suffixes_path,
                          "min_stem_length": self.cfg.min_stem_length},
            "class_counts": {CLASS_NAMES[int(c)]: n for c, n in self.corpus.class_counts.items()},
            "seeds": {str(i): self.seeds(i) for i in range(self.cfg.n_folds)},
            "versions": _versions(),
        }
        _dump_json(self.out / "manifest.json", manifest)
        _dump_json(self.out / "split_plan.json", self.plan.to_dict())

    def _map_folds(self, fn):
        folds = range(self.cfg.n_folds)
        if self.cfg.jobs == 1:
            return [fn(i) for i in folds]
        with ThreadPoolExecutor(self.cfg.jobs) as pool:
            return list(pool.map(fn, folds))

    # -- stages ------------------------------------------------------------

    def fold_features(self, i: int) -> dict[str, np.ndarray]:
        fdir = self.fold_dir(i)
        path, meta = fdir / "features.npz", fdir / "features.json"
        if path.exists() and meta.exists() and _load_json(meta).get("feature_key") == self.feature_key:
            with np.load(path) as z:
                return {k: z[k] for k in z.files}
        fold = self.plan.folds[i]
        train_docs = [self.docs[j] for j in fold.train]
        test_docs = [self.docs[j] for j in fold.test]
        model = fit_feature_model(train_docs, self.corpus.labels[fold.train], self.embeddings,
                                  self.cfg.bow_size, self.cfg.alpha,
                                  str(Path(self.cfg.embeddings).resolve()), self.embedding_sha)
        model.save(fdir / "feature_model.json")
        data = {
            "X_train": featurize(train_docs, model),
            "y_train": self.corpus.labels[fold.train],
            "X_test": featurize(test_docs, model),
            "y_test": self.corpus.labels[fold.test],
            "train_index": fold.train,
            "test_index": fold.test,
        }
        np.savez(path, **data)
        _dump_json(meta, {"feature_key": self.feature_key, "dims": model.dims,
                          "vocabulary_size": len(model.bow.vocabulary)})
        log.info("fold %d: features %s", i, data["X_train"].shape)
        return data

    def featurize(self) -> list[dict]:
        return self._map_folds(self.fold_features)

    def fold_model(self, i: int):
        fdir = self.fold_dir(i)
        mdir = fdir / "model"
        if (mdir / "manifest.json").exists() and _load_json(mdir / "manifest.json").get("model_key") == self.model_key:
            model, _ = load_bundle(mdir)
            model.fusion = FusionMode(self.cfg.fusion)
            return model
        data = self.fold_features(i)
        seeds = self.seeds(i)
        tcfg = dataclasses.replace(self.cfg.train, seed=seeds["train"])
        model, history = train_mcnn(data["X_train"], data["y_train"], tcfg,
                                    [seeds["channels"][k] for k in KERNEL_SIZES], self.cfg.fusion)
        losses = [v for vals in history.channel_losses.values() for v in vals] + history.joint_losses
        if not np.all(np.isfinite(losses)):
            raise NumericError(f"fold {i}: non-finite training loss")
        save_bundle(model, mdir, tcfg, {"model_key": self.model_key,
                                        "feature_model_sha256": file_sha256(fdir / "feature_model.json")})
        _dump_json(fdir / "training_log.json", history.to_dict())
        log.info("fold %d: trained", i)
        return model

    def train(self) -> list:
        return self._map_folds(self.fold_model)

    def fold_metrics(self, i: int):
        data = self.fold_features(i)
        model = self.fold_model(i)
        probs = channel_probs(model, data["X_test"])
        fused = evaluate_predictions(decide(fuse(probs, model.fusion)), data["y_test"])
        channels = {f"C{k}": evaluate_predictions(decide(probs[j]), data["y_test"]).to_dict()
                    for j, k in enumerate(KERNEL_SIZES)}
        _dump_json(self.fold_dir(i) / "metrics.json",
                   {"mcnn": fused.to_dict(), "fusion": model.fusion.value, "channels": channels})
        return fused

    def evaluate(self):
        reports = self._map_folds(self.fold_metrics)
        if len(reports) < 2:
            log.warning("single fold: no aggregate confidence intervals")
            _dump_json(self.out / "report.json", {"n_folds": 1, "fold_0": reports[0].to_dict()})
            return reports
        agg = aggregate(reports)
        write_report(agg, self.out / "report.json", {"model": "mcnn", "fusion": self.cfg.fusion})
        write_folds_csv(agg, self.out / "folds.csv")
        return agg

    def compare_baselines(self, kind: str | None = None):
        kind = kind or self.cfg.baseline_features
        if kind not in FEATURE_KINDS:
            raise ConfigError(f"features must be one of {FEATURE_KINDS}")

        def run_fold(i):
            data = self.fold_features(i)
            dims = _load_json(self.fold_dir(i) / "features.json")["dims"]
            Xtr = select_block(data["X_train"], kind, dims)
            Xte = select_block(data["X_test"], kind, dims)
            out = {}
            for name in self.cfg.baselines:
                hyper = {k: v for k, v in DEFAULT_HYPER[name].items()}
                try:
                    model = train_baseline(name, Xtr, data["y_train"], **hyper)
                except ValueError as exc:
                    raise DataError(f"{name}: {exc}") from None
                preds, _ = predict_baseline_batch(model, Xte)
                out[name] = evaluate_predictions(preds, data["y_test"])
            return out

        per_fold = self._map_folds(run_fold)
        doc = {"features": kind, "n_folds": self.cfg.n_folds, "baselines": {}}
        rows = []
        for name in self.cfg.baselines:
            reports = [f[name] for f in per_fold]
            if len(reports) >= 2:
                agg = aggregate(reports)
                doc["baselines"][name] = agg.to_dict()
            else:
                doc["baselines"][name] = {"n_folds": 1, "fold_0": reports[0].to_dict()}
            for fold, r in enumerate(reports):
                rows.extend((name, fold, m, v) for m, v in r.summary().items())
        _dump_json(self.out / f"baselines_{kind}.json", doc)
        with open(self.out / f"baselines_{kind}_folds.csv", "w", encoding="utf-8") as fh:
            fh.write("baseline,fold,metric,value\n")
            fh.writelines(f"{n},{f},{m},{v!r}\n" for n, f, m, v in rows)
        return doc


def predict_texts(fold_dir: str | Path, texts: list[str]) -> list[tuple[int, np.ndarray]]:
    """Classify raw tweets with the feature model and MCNN bundle of one fold."""
    fold_dir = Path(fold_dir)
    run_manifest = _load_json(fold_dir.parent / "manifest.json")
    res = run_manifest["resources"]
    pre = load_config(res["stopwords"], res["suffixes"], res["min_stem_length"])
    fm = FeatureModel.load(fold_dir / "feature_model.json")
    model, _ = load_bundle(fold_dir / "model")
    model.fusion = FusionMode(run_manifest["config"]["fusion"])
    if fm.hybrid_dim != model.input_length:
        raise DataError(f"feature dimension {fm.hybrid_dim} != model input length {model.input_length}")
    if not texts:
        return []
    X = featurize([preprocess(t, pre) for t in texts], fm)
    classes, scores = predict_batch(model, X)
    return [(int(c), s) for c, s in zip(classes, scores)]


def _dump_json(path: Path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, ensure_ascii=False, default=_json_default)


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def _load_json(path: Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)

